use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statistics::{MomentAccumulator, StructureTable};

use super::fit::{fit_column, fit_power_law, indices_in, require_points, ScalingFit};

/// Outcome of one law check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawVerdict {
    pub law: String,
    pub passed: bool,
    pub measured: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub stderr: f64,
    pub samples: u64,
    pub notes: Vec<String>,
}

impl LawVerdict {
    /// Pass iff `|measured − predicted| ≤ tolerance`.
    pub fn absolute(law: &str, measured: f64, predicted: f64, tolerance: f64, stderr: f64, samples: u64) -> Self {
        Self {
            law: law.into(),
            passed: (measured - predicted).abs() <= tolerance,
            measured,
            predicted,
            tolerance,
            stderr,
            samples,
            notes: Vec::new(),
        }
    }

    /// Pass iff `|measured − predicted| ≤ tolerance · |predicted|`.
    pub fn relative(law: &str, measured: f64, predicted: f64, tolerance: f64, stderr: f64, samples: u64) -> Self {
        let mut v = Self::absolute(law, measured, predicted, tolerance * predicted.abs(), stderr, samples);
        v.tolerance = tolerance;
        v
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: measured {:.6} ± {:.2e}, predicted {:.6}, tolerance {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.law,
            self.measured,
            self.stderr,
            self.predicted,
            self.tolerance
        )
    }
}

/// Separations bounding the viscous, inertial and strongly inertial ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    /// `c₁ν`; below it structure functions follow `l^p`.
    pub dissipation_cut: f64,
    /// `L(ν) = ν^{2/3}`.
    pub floor: f64,
    pub cap: f64,
    /// Widest window where the local slope of `S_{2,l}` is within ±0.2 of 1.
    pub detected: Option<(f64, f64)>,
}

pub const DEFAULT_CAP: f64 = 0.1;
pub const DISSIPATION_C1: f64 = 1.0;

/// `[L(ν), c]` with `L(ν) = ν^{2/3}`.
pub fn strong_inertial_range(nu: f64, cap: f64) -> Result<RangeSpec> {
    let floor = nu.powf(2.0 / 3.0);
    if !(nu > 0.0 && nu <= 1.0) || floor >= cap {
        return Err(Error::EmptyRange { floor, cap });
    }
    Ok(RangeSpec {
        dissipation_cut: DISSIPATION_C1 * nu,
        floor,
        cap,
        detected: None,
    })
}

/// Relative size `√(νl)/l` of the discarded viscous term at `l`.
pub fn discarded_term_ratio(nu: f64, l: f64) -> f64 {
    (nu * l).sqrt() / l
}

/// Widest window (in `ln l`) whose centered local log-slopes of `S_{2,l}` lie
/// within `slope_tol` of 1.
pub fn detect_inertial_range(table: &StructureTable, slope_tol: f64) -> Option<(f64, f64)> {
    let s2 = table.absolute_for(2.0)?;
    let l = &table.l;
    let n = l.len();
    if n < 3 {
        return None;
    }
    let good: Vec<bool> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                return false;
            }
            let (a, b) = (s2[i - 1].mean(), s2[i + 1].mean());
            if !(a > 0.0 && b > 0.0) {
                return false;
            }
            let slope = (b / a).ln() / (l[i + 1] / l[i - 1]).ln();
            (slope - 1.0).abs() <= slope_tol
        })
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < n {
        if good[i] {
            let start = i;
            while i + 1 < n && good[i + 1] {
                i += 1;
            }
            let wider = best.is_none_or(|(a, b)| l[i] / l[start] > l[b] / l[a]);
            if i > start && wider {
                best = Some((start, i));
            }
        }
        i += 1;
    }
    best.map(|(a, b)| (l[a], l[b]))
}

impl RangeSpec {
    /// Strong range plus the detected window; the dissipation cut is lowered
    /// to the window's lower end when that is smaller than `c₁ν`.
    pub fn calibrated(nu: f64, cap: f64, table: &StructureTable) -> Result<Self> {
        let mut r = strong_inertial_range(nu, cap)?;
        r.detected = detect_inertial_range(table, 0.2);
        if let Some((lo, _)) = r.detected {
            r.dissipation_cut = r.dissipation_cut.min(lo);
        }
        Ok(r)
    }

    /// Window for the inertial exponent fits: the detected window clipped to
    /// `[c₁ν, c]`, or the strong range if nothing was detected.
    pub fn inertial(&self) -> (f64, f64) {
        match self.detected {
            Some((lo, hi)) if hi.min(self.cap) > lo.max(self.dissipation_cut) => {
                (lo.max(self.dissipation_cut), hi.min(self.cap))
            }
            _ => (self.floor, self.cap),
        }
    }
}

/// Weighted mean of `column/(scale·l)` over the indexed separations with
/// weights `1/stderr²`; equal weights when some stderr is unavailable.
pub fn weighted_ratio(l: &[f64], column: &[MomentAccumulator], idx: &[usize], scale: f64) -> (f64, f64) {
    let ratios: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| {
            let d = scale * l[i];
            (column[i].mean() / d, column[i].stderr() / d.abs())
        })
        .collect();
    let weighted = ratios.iter().all(|(_, s)| s.is_finite() && *s > 0.0);
    if weighted {
        let (num, den) = ratios
            .iter()
            .fold((0.0, 0.0), |(n, d), (r, s)| (n + r / (s * s), d + 1.0 / (s * s)));
        (num / den, den.sqrt().recip())
    } else {
        let mean = ratios.iter().map(|r| r.0).sum::<f64>() / ratios.len() as f64;
        (mean, f64::NAN)
    }
}

fn signed_cubic(table: &StructureTable) -> Result<&[MomentAccumulator]> {
    table
        .signed_for(3.0)
        .ok_or_else(|| Error::MissingObservables(vec!["signed third moment (p = 3)".into()]))
}

/// `E s_{3,l}/l` against `−6B₀` over `[lo, hi]`; needs eight separations.
/// When `dissipation` (ε^B statistics) is given the ratio is also reported
/// against `−12 ε^B`.
pub fn verify_45(
    table: &StructureTable,
    b0: f64,
    lo: f64,
    hi: f64,
    dissipation: Option<&MomentAccumulator>,
    tolerance: f64,
) -> Result<LawVerdict> {
    let s3 = signed_cubic(table)?;
    let idx = indices_in(&table.l, lo, hi);
    require_points(&idx, 8, lo, hi)?;
    let (ratio, se) = weighted_ratio(&table.l, s3, &idx, 1.0);
    let samples = s3[idx[0]].count();
    let mut v = LawVerdict::relative("four_fifths", ratio, -6.0 * b0, tolerance, se, samples).note(format!(
        "{} separations in [{lo:.4}, {hi:.4}]",
        idx.len()
    ));
    if let Some(eps) = dissipation {
        v = v.note(format!(
            "against -12 eps^B = {:.4} ± {:.4}: relative deviation {:.3}",
            -12.0 * eps.mean(),
            12.0 * eps.stderr(),
            ratio / (-12.0 * eps.mean()) - 1.0
        ));
    }
    Ok(v)
}

/// Mean `|E s_{3,l}/l + 6B₀|` over the lower and the upper half of the
/// separations in `[lo, hi]`.
pub fn correction_trend(table: &StructureTable, b0: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let s3 = signed_cubic(table)?;
    let idx = indices_in(&table.l, lo, hi);
    require_points(&idx, 4, lo, hi)?;
    let dev: Vec<f64> = idx.iter().map(|&i| (s3[i].mean() / table.l[i] + 6.0 * b0).abs()).collect();
    let half = dev.len() / 2;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok((mean(&dev[..half]), mean(&dev[dev.len() - half..])))
}

/// `S^s_{3,l}/l < 0` throughout `[lo, hi]`, and the positive-part cubic
/// moment scales at least like `l^{3 − tolerance}`.
pub fn weak_law_check(table: &StructureTable, lo: f64, hi: f64, tolerance: f64) -> Result<LawVerdict> {
    let s3 = signed_cubic(table)?;
    let idx = indices_in(&table.l, lo, hi);
    require_points(&idx, 6, lo, hi)?;
    let ratios: Vec<f64> = idx.iter().map(|&i| s3[i].mean() / table.l[i]).collect();
    let negative = ratios.iter().all(|&r| r < 0.0);
    let (rmin, rmax) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r.abs()), b.max(r.abs())));
    let pos = fit_column(&table.l, &table.positive_cubic, 3.0, lo, hi)?;
    let passed = negative && pos.exponent >= 3.0 - tolerance;
    Ok(LawVerdict {
        law: "weak_law".into(),
        passed,
        measured: pos.exponent,
        predicted: 3.0,
        tolerance,
        stderr: pos.stderr,
        samples: s3[idx[0]].count(),
        notes: vec![
            format!("S3/l negative on all {} separations: {negative}", idx.len()),
            format!("|S3/l| ranges over [{rmin:.4}, {rmax:.4}], max/min {:.3}", rmax / rmin),
        ],
    })
}

/// Log-log slope of `⟨⟨E‖u‖_m²⟩⟩` against ν; predicted `−(2m−1)` for
/// `m ≥ 1` and `0` for `m = 0`.
pub fn sobolev_scaling_check(nus: &[f64], norms: &[MomentAccumulator], m: u32, tolerance: f64) -> Result<LawVerdict> {
    let means: Vec<f64> = norms.iter().map(|a| a.mean()).collect();
    let fit: ScalingFit = fit_power_law(nus, &means)?;
    let predicted = if m == 0 { 0.0 } else { -(2.0 * m as f64 - 1.0) };
    let samples = norms.iter().map(|a| a.count()).min().unwrap_or(0);
    let mut v = LawVerdict::absolute(&format!("sobolev_m{m}"), fit.exponent, predicted, tolerance, fit.stderr, samples);
    for (nu, a) in nus.iter().zip(norms) {
        v = v.note(format!("nu = {nu}: {:.5} ± {:.5}", a.mean(), a.stderr()));
    }
    Ok(v)
}

/// Two-window mean-equality test at the 5% level; returns `(z, stationary)`.
pub fn stationarity_test(first: &MomentAccumulator, second: &MomentAccumulator) -> (f64, bool) {
    let se = (first.stderr().powi(2) + second.stderr().powi(2)).sqrt();
    let z = (second.mean() - first.mean()) / se;
    (z, z.abs() <= 1.96 || se == 0.0 && first.mean() == second.mean())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(l: &[f64], s3: impl Fn(f64) -> f64, s2: impl Fn(f64) -> f64, pos: impl Fn(f64) -> f64) -> StructureTable {
        let mut t = StructureTable::new(l.to_vec(), vec![2.0, 3.0]);
        for (i, &x) in l.iter().enumerate() {
            t.absolute[0][i].push(s2(x));
            t.signed[1].as_mut().unwrap()[i].push(s3(x));
            t.positive_cubic[i].push(pos(x));
        }
        t
    }

    fn log_l(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn strong_range_values() {
        let r = strong_inertial_range(1e-3, 0.1).unwrap();
        assert!((r.floor - 1e-2).abs() < 1e-15);
        assert!((discarded_term_ratio(1e-3, 1e-2) - 0.316).abs() < 1e-3);
        assert!(discarded_term_ratio(1e-4, 1e-4f64.powf(2.0 / 3.0)) < discarded_term_ratio(1e-3, 1e-2));
        assert!(matches!(strong_inertial_range(0.5, 0.1), Err(Error::EmptyRange { .. })));
        assert!(r.dissipation_cut <= r.floor && r.floor <= r.cap);
    }

    #[test]
    fn synthetic_four_fifths_law() {
        let l = log_l(1e-3, 0.25, 40);
        let t = table(&l, |x| -6.0 * x, |x| x, |x| x.powi(3));
        let v = verify_45(&t, 1.0, 0.0159, 0.1, None, 0.2).unwrap();
        assert!(v.passed);
        assert!((v.measured + 6.0).abs() < 1e-13);
        let too_narrow = verify_45(&t, 1.0, 0.05, 0.06, None, 0.2);
        assert!(matches!(too_narrow, Err(Error::InsufficientRange { .. })));
        let wrong = table(&l, |x| -3.0 * x, |x| x, |x| x.powi(3));
        assert!(!verify_45(&wrong, 1.0, 0.0159, 0.1, None, 0.2).unwrap().passed);
    }

    #[test]
    fn weights_follow_stderr() {
        let l = [1.0, 1.0];
        let col = [
            MomentAccumulator::from_samples([1.0, 3.0]),
            MomentAccumulator::from_samples([0.0, 20.0]),
        ];
        let (r, se) = weighted_ratio(&l, &col, &[0, 1], 1.0);
        // stderr 1 and 10: weights 1 and 0.01
        assert!((r - (2.0 + 0.1) / 1.01).abs() < 1e-12);
        assert!((se - 1.01f64.sqrt().recip()).abs() < 1e-12);
    }

    #[test]
    fn correction_trend_detects_l_squared() {
        let l = log_l(0.01, 0.1, 20);
        let t = table(&l, |x| -6.0 * x + 50.0 * x.powi(3), |x| x, |x| x.powi(3));
        let (lower, upper) = correction_trend(&t, 1.0, 0.01, 0.1).unwrap();
        assert!(lower < upper);
    }

    #[test]
    fn detects_linear_window() {
        // l² below 0.01, l above
        let l = log_l(1e-3, 0.25, 60);
        let t = table(&l, |x| -6.0 * x, |x| if x < 0.01 { x * x / 0.01 } else { x }, |x| x.powi(3));
        let (lo, hi) = detect_inertial_range(&t, 0.2).unwrap();
        assert!(lo > 0.008 && lo < 0.02, "{lo}");
        assert!(hi > 0.2, "{hi}");
        let r = RangeSpec::calibrated(2e-3, 0.1, &t).unwrap();
        assert_eq!(r.inertial().1, 0.1);
    }

    #[test]
    fn weak_law_synthetic() {
        let l = log_l(0.002, 0.1, 30);
        let t = table(&l, |x| -6.0 * x, |x| x, |x| 2.0 * x.powi(3));
        let v = weak_law_check(&t, 0.002, 0.1, 0.3).unwrap();
        assert!(v.passed, "{v:?}");
        assert!((v.measured - 3.0).abs() < 1e-12);
        let bad = table(&l, |x| if x > 0.05 { x } else { -x }, |x| x, |x| x.powi(3));
        assert!(!weak_law_check(&bad, 0.002, 0.1, 0.3).unwrap().passed);
    }

    #[test]
    fn sobolev_exact_inputs() {
        let nus = [4e-3, 2e-3, 1e-3];
        let h1: Vec<_> = nus.iter().map(|nu| MomentAccumulator::from_samples([0.5 / nu])).collect();
        let v = sobolev_scaling_check(&nus, &h1, 1, 0.3).unwrap();
        assert!(v.passed && (v.measured + 1.0).abs() < 1e-12);
        let l2: Vec<_> = nus.iter().map(|_| MomentAccumulator::from_samples([0.3])).collect();
        let v = sobolev_scaling_check(&nus, &l2, 0, 0.3).unwrap();
        assert!(v.passed && v.measured.abs() < 1e-12);
    }

    #[test]
    fn stationarity() {
        let a = MomentAccumulator::from_samples([1.0, 1.1, 0.9, 1.0]);
        let b = MomentAccumulator::from_samples([1.02, 1.08, 0.95, 1.0]);
        assert!(stationarity_test(&a, &b).1);
        let c = MomentAccumulator::from_samples([2.0, 2.1, 1.9, 2.0]);
        assert!(!stationarity_test(&a, &c).1);
    }
}
