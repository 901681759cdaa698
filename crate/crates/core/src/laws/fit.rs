use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statistics::{MomentAccumulator, StructureTable};

/// Least-squares power law `y ≈ e^{log_prefactor} x^{exponent}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    pub l_lo: f64,
    pub l_hi: f64,
    pub stderr: f64,
    pub residual_rms: f64,
    pub points: usize,
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientRange {
            needed: 2,
            found: n,
            lo: xs.first().copied().unwrap_or(f64::NAN),
            hi: xs.last().copied().unwrap_or(f64::NAN),
        });
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if !(y > 0.0) || !(x > 0.0) {
            return Err(Error::NonPositiveData { p: f64::NAN, l: x, value: y });
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let stderr = if n > 2 { (ssr / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(ScalingFit {
        exponent,
        log_prefactor: intercept,
        l_lo: lo,
        l_hi: hi,
        stderr,
        residual_rms: (ssr / n as f64).sqrt(),
        points: n,
    })
}

/// Indices of table separations inside `[lo, hi]`.
pub fn indices_in(l: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    let tol = 1e-12;
    (0..l.len()).filter(|&i| l[i] >= lo * (1.0 - tol) && l[i] <= hi * (1.0 + tol)).collect()
}

pub(crate) fn require_points(idx: &[usize], needed: usize, lo: f64, hi: f64) -> Result<()> {
    if idx.len() < needed {
        return Err(Error::InsufficientRange {
            needed,
            found: idx.len(),
            lo,
            hi,
        });
    }
    Ok(())
}

/// Fits `|S_{p,l}|` means over `l ∈ [lo, hi]`; needs at least six points.
pub fn fit_structure_exponent(table: &StructureTable, p: f64, lo: f64, hi: f64) -> Result<ScalingFit> {
    let column = table.absolute_for(p).ok_or_else(|| {
        Error::MissingObservables(vec![format!("absolute structure function for p = {p}")])
    })?;
    fit_column(&table.l, column, p, lo, hi)
}

pub(crate) fn fit_column(l: &[f64], column: &[MomentAccumulator], p: f64, lo: f64, hi: f64) -> Result<ScalingFit> {
    let idx = indices_in(l, lo, hi);
    require_points(&idx, 6, lo, hi)?;
    for &i in &idx {
        let v = column[i].mean();
        if !(v > 0.0) {
            return Err(Error::NonPositiveData { p, l: l[i], value: v });
        }
    }
    let xs: Vec<f64> = idx.iter().map(|&i| l[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| column[i].mean()).collect();
    fit_power_law(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_from(l: &[f64], f: impl Fn(f64) -> f64) -> StructureTable {
        let mut t = StructureTable::new(l.to_vec(), vec![2.0]);
        for (i, &x) in l.iter().enumerate() {
            t.absolute[0][i].push(f(x));
        }
        t
    }

    #[test]
    fn exact_power_law() {
        let l: Vec<f64> = (0..10).map(|i| 0.01 * 1.3f64.powi(i)).collect();
        let t = table_from(&l, |x| 3.0 * x.sqrt());
        let fit = fit_structure_exponent(&t, 2.0, 0.0, 1.0).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-13);
        assert!((fit.log_prefactor - 3f64.ln()).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert_eq!(fit.points, 10);
    }

    #[test]
    fn errors() {
        let l: Vec<f64> = (1..=5).map(|i| i as f64 * 0.01).collect();
        let t = table_from(&l, |x| x);
        assert!(matches!(fit_structure_exponent(&t, 2.0, 0.0, 1.0), Err(Error::InsufficientRange { found: 5, .. })));
        let l: Vec<f64> = (1..=8).map(|i| i as f64 * 0.01).collect();
        let t = table_from(&l, |x| x - 0.03);
        assert!(matches!(fit_structure_exponent(&t, 2.0, 0.0, 1.0), Err(Error::NonPositiveData { .. })));
        assert!(matches!(fit_structure_exponent(&t, 3.0, 0.0, 1.0), Err(Error::MissingObservables(_))));
    }

    proptest! {
        #[test]
        fn exponent_invariant_under_scaling(c in 0.01f64..100.0, noise in prop::collection::vec(0.9f64..1.1, 8)) {
            let l: Vec<f64> = (0..8).map(|i| 0.01 * 1.5f64.powi(i)).collect();
            let base = table_from(&l, |x| x);
            let mut a = base.clone();
            let mut b = base.clone();
            for i in 0..8 {
                a.absolute[0][i] = MomentAccumulator::from_samples([l[i] * noise[i]]);
                b.absolute[0][i] = MomentAccumulator::from_samples([c * l[i] * noise[i]]);
            }
            let fa = fit_structure_exponent(&a, 2.0, 0.0, 1.0).unwrap();
            let fb = fit_structure_exponent(&b, 2.0, 0.0, 1.0).unwrap();
            prop_assert!((fa.exponent - fb.exponent).abs() < 1e-12);
            prop_assert!((fb.log_prefactor - fa.log_prefactor - c.ln()).abs() < 1e-10);
        }
    }
}
