use serde::{Deserialize, Serialize};

use super::accumulator::{merge_all, CompensatedSum, MomentAccumulator};
use crate::error::{Error, Result};

pub const DEFAULT_P_LIST: [f64; 6] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

/// Separations realised as whole-cell circular shifts `m` on an `n`-point grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LGrid {
    n: usize,
    shifts: Vec<usize>,
}

impl LGrid {
    /// `per_decade` log-spaced points from `4/n` to `0.25`, merged where they
    /// round to the same shift.
    pub fn logarithmic(n: usize, per_decade: usize) -> Result<Self> {
        Self::log_range(n, 4.0 / n as f64, 0.25, per_decade)
    }

    pub fn log_range(n: usize, lo: f64, hi: f64, per_decade: usize) -> Result<Self> {
        let decades = (hi / lo).log10();
        let count = (decades * per_decade as f64).floor() as usize;
        let mut ls: Vec<f64> = (0..=count)
            .map(|i| lo * 10f64.powf(i as f64 / per_decade as f64))
            .collect();
        ls.push(hi);
        Self::from_separations(n, &ls)
    }

    /// Rounds each `l` to the nearest multiple of `1/n`; sorted and deduplicated.
    pub fn from_separations(n: usize, ls: &[f64]) -> Result<Self> {
        let min_l = 2.0 / n as f64;
        let mut shifts = Vec::with_capacity(ls.len());
        for &l in ls {
            let m = (l * n as f64).round();
            if !(m >= 2.0) {
                return Err(Error::LBelowResolution { l, min_l });
            }
            if m >= n as f64 {
                return Err(Error::InvalidConfig(vec![format!("separation {l} wraps the period")]));
            }
            shifts.push(m as usize);
        }
        shifts.sort_unstable();
        shifts.dedup();
        Ok(Self { n, shifts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shifts(&self) -> &[usize] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    /// Effective separations `m/n`.
    pub fn values(&self) -> Vec<f64> {
        self.shifts.iter().map(|&m| m as f64 / self.n as f64).collect()
    }
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0 && p.abs() < 64.0
}

/// Per-snapshot moments of `δ^l u(x) = u(x + l) − u(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementMoments {
    pub l: Vec<f64>,
    pub p_list: Vec<f64>,
    /// `∫|δ^l u|^p dx`, indexed `[p][l]`.
    pub absolute: Vec<Vec<f64>>,
    /// `∫(δ^l u)^p dx` for integer `p`.
    pub signed: Vec<Option<Vec<f64>>>,
    /// `∫((δ^l u)⁺)³ dx`.
    pub positive_cubic: Vec<f64>,
}

/// Grid sums `(1/n) Σ_j` of increment powers over the shifts of `grid`.
pub fn increment_moments(values: &[f64], grid: &LGrid, p_list: &[f64]) -> Result<IncrementMoments> {
    let n = values.len();
    if n != grid.n() {
        return Err(Error::LayoutMismatch(format!(
            "{n} samples for an l-grid built on {} points",
            grid.n()
        )));
    }
    let np = p_list.len();
    let mut absolute = vec![Vec::with_capacity(grid.len()); np];
    let mut signed: Vec<Option<Vec<f64>>> = p_list
        .iter()
        .map(|&p| is_integer(p).then(|| Vec::with_capacity(grid.len())))
        .collect();
    let mut positive_cubic = Vec::with_capacity(grid.len());
    let mut abs_sums = vec![CompensatedSum::default(); np];
    let mut signed_sums = vec![CompensatedSum::default(); np];
    let inv_n = 1.0 / n as f64;
    for &m in grid.shifts() {
        abs_sums.fill(CompensatedSum::default());
        signed_sums.fill(CompensatedSum::default());
        let mut pos = CompensatedSum::default();
        let (head, tail) = values.split_at(m);
        let shifted = tail.iter().chain(head);
        for (&u, &v) in values.iter().zip(shifted) {
            let d = v - u;
            let a = d.abs();
            for (i, &p) in p_list.iter().enumerate() {
                let (ap, sp) = power(d, a, p);
                abs_sums[i].add(ap);
                signed_sums[i].add(sp);
            }
            if d > 0.0 {
                pos.add(d * d * d);
            }
        }
        for i in 0..np {
            absolute[i].push(abs_sums[i].value() * inv_n);
            if let Some(s) = signed[i].as_mut() {
                s.push(signed_sums[i].value() * inv_n);
            }
        }
        positive_cubic.push(pos.value() * inv_n);
    }
    Ok(IncrementMoments {
        l: grid.values(),
        p_list: p_list.to_vec(),
        absolute,
        signed,
        positive_cubic,
    })
}

// (|d|^p, d^p) with d^p only meaningful for integer p
#[inline]
fn power(d: f64, a: f64, p: f64) -> (f64, f64) {
    if p == 1.0 {
        (a, d)
    } else if p == 2.0 {
        let s = d * d;
        (s, s)
    } else if p == 3.0 {
        let s = d * d * d;
        (a * a * a, s)
    } else if p == 4.0 {
        let s = (d * d) * (d * d);
        (s, s)
    } else if p == 5.0 {
        let s = (d * d) * (d * d) * d;
        (a * (d * d) * (d * d), s)
    } else if p == 0.5 {
        (a.sqrt(), 0.0)
    } else if is_integer(p) {
        (a.powi(p as i32), d.powi(p as i32))
    } else {
        (a.powf(p), 0.0)
    }
}

/// `3 ∫ (v^l v² − (v^l)² v) dx` with `v^l(x) = v(x + l)`; equals the signed
/// third moment for zero-mean periodic data.
pub fn s3_identity(values: &[f64], shift: usize) -> f64 {
    let n = values.len();
    let (head, tail) = values.split_at(shift % n);
    let mut acc = CompensatedSum::default();
    for (&v, &w) in values.iter().zip(tail.iter().chain(head)) {
        acc.add(w * v * v - w * w * v);
    }
    3.0 * acc.value() / n as f64
}

/// Ensemble accumulators of structure functions over an l-grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureTable {
    pub l: Vec<f64>,
    pub p_list: Vec<f64>,
    pub absolute: Vec<Vec<MomentAccumulator>>,
    pub signed: Vec<Option<Vec<MomentAccumulator>>>,
    pub positive_cubic: Vec<MomentAccumulator>,
}

impl StructureTable {
    pub fn new(l: Vec<f64>, p_list: Vec<f64>) -> Self {
        let nl = l.len();
        let absolute = vec![vec![MomentAccumulator::new(); nl]; p_list.len()];
        let signed = p_list
            .iter()
            .map(|&p| is_integer(p).then(|| vec![MomentAccumulator::new(); nl]))
            .collect();
        Self {
            l,
            p_list,
            absolute,
            signed,
            positive_cubic: vec![MomentAccumulator::new(); nl],
        }
    }

    fn check_layout(&self, l: &[f64], p_list: &[f64]) -> Result<()> {
        if self.l != l || self.p_list != p_list {
            return Err(Error::LayoutMismatch(format!(
                "table has {} separations and p = {:?}, input has {} and p = {:?}",
                self.l.len(),
                self.p_list,
                l.len(),
                p_list
            )));
        }
        Ok(())
    }

    pub fn push(&mut self, m: &IncrementMoments) -> Result<()> {
        self.check_layout(&m.l, &m.p_list)?;
        for (acc, vals) in self.absolute.iter_mut().zip(&m.absolute) {
            for (a, &v) in acc.iter_mut().zip(vals) {
                a.push(v);
            }
        }
        for (acc, vals) in self.signed.iter_mut().zip(&m.signed) {
            if let (Some(acc), Some(vals)) = (acc, vals) {
                for (a, &v) in acc.iter_mut().zip(vals) {
                    a.push(v);
                }
            }
        }
        for (a, &v) in self.positive_cubic.iter_mut().zip(&m.positive_cubic) {
            a.push(v);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &StructureTable) -> Result<()> {
        self.check_layout(&other.l, &other.p_list)?;
        for (a, b) in self.absolute.iter_mut().zip(&other.absolute) {
            merge_all(a, b)?;
        }
        for (a, b) in self.signed.iter_mut().zip(&other.signed) {
            if let (Some(a), Some(b)) = (a, b) {
                merge_all(a, b)?;
            }
        }
        merge_all(&mut self.positive_cubic, &other.positive_cubic)
    }

    pub fn p_index(&self, p: f64) -> Option<usize> {
        self.p_list.iter().position(|&q| q == p)
    }

    pub fn absolute_for(&self, p: f64) -> Option<&[MomentAccumulator]> {
        self.p_index(p).map(|i| self.absolute[i].as_slice())
    }

    pub fn signed_for(&self, p: f64) -> Option<&[MomentAccumulator]> {
        self.p_index(p).and_then(|i| self.signed[i].as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2, TAU};

    fn sine(n: usize) -> Vec<f64> {
        (0..n).map(|j| SQRT_2 * (TAU * j as f64 / n as f64).sin()).collect()
    }

    // u(x) = x − 1/2 at cell centers
    fn sawtooth(n: usize) -> Vec<f64> {
        (0..n).map(|j| (j as f64 + 0.5) / n as f64 - 0.5).collect()
    }

    #[test]
    fn l_grid_construction() {
        let g = LGrid::logarithmic(4096, 32).unwrap();
        assert_eq!(g.shifts()[0], 4);
        assert_eq!(*g.shifts().last().unwrap(), 1024);
        assert!(g.shifts().windows(2).all(|w| w[0] < w[1]));
        // ~2.4 decades; low end collapses onto integers
        assert!(g.len() > 60 && g.len() <= 79, "{}", g.len());
        assert!(matches!(
            LGrid::from_separations(100, &[0.001]),
            Err(Error::LBelowResolution { min_l, .. }) if min_l == 0.02
        ));
    }

    #[test]
    fn sine_structure_functions() {
        let n = 4096;
        let grid = LGrid::from_separations(n, &[0.25, 0.1, 0.01]).unwrap();
        let m = increment_moments(&sine(n), &grid, &[2.0, 3.0]).unwrap();
        for (i, &l) in m.l.iter().enumerate() {
            let s2 = 4.0 * (PI * l).sin().powi(2);
            assert!((m.absolute[0][i] - s2).abs() < 1e-8);
            assert!(m.signed[1].as_ref().unwrap()[i].abs() < 1e-8);
        }
        assert!((m.absolute[0][2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sawtooth_structure_functions() {
        let n = 4096;
        let grid = LGrid::logarithmic(n, 32).unwrap();
        let m = increment_moments(&sawtooth(n), &grid, &[2.0, 3.0]).unwrap();
        for (i, &l) in m.l.iter().enumerate() {
            assert!((m.signed[1].as_ref().unwrap()[i] + l * (1.0 - l) * (1.0 - 2.0 * l)).abs() < 1e-8);
            assert!((m.absolute[0][i] - l * (1.0 - l)).abs() < 1e-8);
        }
        let grid = LGrid::from_separations(1000, &[0.1]).unwrap();
        let m = increment_moments(&sawtooth(1000), &grid, &[2.0, 3.0]).unwrap();
        assert!((m.signed[1].as_ref().unwrap()[0] + 0.072).abs() < 1e-12);
        assert!((m.absolute[0][0] - 0.09).abs() < 1e-12);
    }

    #[test]
    fn half_power_has_no_signed_moment() {
        let grid = LGrid::from_separations(64, &[0.25]).unwrap();
        let m = increment_moments(&sine(64), &grid, &DEFAULT_P_LIST).unwrap();
        assert!(m.signed[0].is_none());
        assert!(m.signed[1].is_some());
    }

    #[test]
    fn wrong_sample_count_is_rejected() {
        let grid = LGrid::from_separations(64, &[0.25]).unwrap();
        assert!(increment_moments(&sine(32), &grid, &[2.0]).is_err());
    }

    fn random_field(coeffs: &[f64], n: usize) -> Vec<f64> {
        let k = coeffs.len() / 2;
        (0..n)
            .map(|j| {
                let x = j as f64 / n as f64;
                (0..k)
                    .map(|i| {
                        let w = TAU * (i + 1) as f64 * x;
                        SQRT_2 * (coeffs[2 * i] * w.cos() + coeffs[2 * i + 1] * w.sin())
                    })
                    .sum()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn s3_two_ways(coeffs in prop::collection::vec(-1.0f64..1.0, 2..16), m in 2usize..100) {
            let n = 256;
            let u = random_field(&coeffs, n);
            let grid = LGrid { n, shifts: vec![m] };
            let mom = increment_moments(&u, &grid, &[3.0]).unwrap();
            let direct = mom.signed[0].as_ref().unwrap()[0];
            prop_assert!((direct - s3_identity(&u, m)).abs() < 1e-9);
            // x³ = −|x|³ + 2(x⁺)³
            let split = -mom.absolute[0][0] + 2.0 * mom.positive_cubic[0];
            prop_assert!((direct - split).abs() < 1e-10);
        }

        #[test]
        fn even_moments_signed_equal_absolute(coeffs in prop::collection::vec(-1.0f64..1.0, 2..12)) {
            let u = random_field(&coeffs, 128);
            let grid = LGrid::logarithmic(128, 8).unwrap();
            let m = increment_moments(&u, &grid, &[2.0, 4.0]).unwrap();
            for i in 0..2 {
                prop_assert_eq!(m.signed[i].as_ref().unwrap(), &m.absolute[i]);
            }
        }

        #[test]
        fn shift_invariance(coeffs in prop::collection::vec(-1.0f64..1.0, 2..12), r in 0usize..128) {
            let u = random_field(&coeffs, 128);
            let mut v = u.clone();
            v.rotate_left(r);
            let grid = LGrid::logarithmic(128, 8).unwrap();
            let a = increment_moments(&u, &grid, &DEFAULT_P_LIST).unwrap();
            let b = increment_moments(&v, &grid, &DEFAULT_P_LIST).unwrap();
            for (x, y) in a.absolute.iter().flatten().zip(b.absolute.iter().flatten()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn amplitude_scaling_is_exact(coeffs in prop::collection::vec(-1.0f64..1.0, 2..12), mu in 1.0f64..4.0) {
            let u = random_field(&coeffs, 128);
            let w: Vec<f64> = u.iter().map(|x| mu * x).collect();
            let grid = LGrid::logarithmic(128, 8).unwrap();
            let a = increment_moments(&u, &grid, &DEFAULT_P_LIST).unwrap();
            let b = increment_moments(&w, &grid, &DEFAULT_P_LIST).unwrap();
            for (i, &p) in DEFAULT_P_LIST.iter().enumerate() {
                for (x, y) in a.absolute[i].iter().zip(&b.absolute[i]) {
                    prop_assert!((y - mu.powf(p) * x).abs() <= 1e-12 * y.abs().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn table_merge_equals_single_pass() {
        let grid = LGrid::logarithmic(64, 8).unwrap();
        let fields: Vec<Vec<f64>> = (1..6)
            .map(|k| (0..64).map(|j| ((k * j) as f64 * 0.37).sin()).collect())
            .collect();
        let mut whole = StructureTable::new(grid.values(), DEFAULT_P_LIST.to_vec());
        let mut a = whole.clone();
        let mut b = whole.clone();
        for (i, f) in fields.iter().enumerate() {
            let m = increment_moments(f, &grid, &DEFAULT_P_LIST).unwrap();
            whole.push(&m).unwrap();
            if i < 2 { a.push(&m).unwrap() } else { b.push(&m).unwrap() }
        }
        a.merge(&b).unwrap();
        for (x, y) in a.absolute.iter().flatten().zip(whole.absolute.iter().flatten()) {
            assert!((x.mean() - y.mean()).abs() < 1e-12 * (1.0 + y.mean().abs()));
            assert_eq!(x.count(), 5);
        }
        let other = StructureTable::new(vec![0.1], vec![2.0]);
        assert!(a.merge(&other).is_err());
    }
}
