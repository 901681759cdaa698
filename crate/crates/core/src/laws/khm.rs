use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::statistics::EnsembleStats;

/// Per-separation residual of a KHM identity with the terms that enter it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KHMReport {
    pub l: Vec<f64>,
    pub residual: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Term magnitudes in the order the identity lists them.
    pub terms: Vec<Vec<f64>>,
    pub term_names: Vec<String>,
    pub warnings: Vec<String>,
}

impl KHMReport {
    /// `max_i |terms_i(l)|` per separation.
    pub fn scale(&self) -> Vec<f64> {
        (0..self.l.len())
            .map(|j| self.terms.iter().fold(0.0f64, |m, t| m.max(t[j].abs())))
            .collect()
    }

    /// Largest `|residual|/stderr` over separations with finite stderr.
    pub fn max_z(&self) -> f64 {
        self.residual
            .iter()
            .zip(&self.stderr)
            .filter(|(_, s)| s.is_finite() && **s > 0.0)
            .map(|(r, s)| (r / s).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|residual|/max_l scale` over indices in `[lo, hi]`.
    pub fn max_relative(&self, lo: f64, hi: f64) -> f64 {
        let scale = self.scale();
        let idx: Vec<usize> = (0..self.l.len()).filter(|&i| self.l[i] >= lo && self.l[i] <= hi).collect();
        let top = idx.iter().map(|&i| scale[i]).fold(0.0, f64::max);
        idx.iter().map(|&i| self.residual[i].abs() / top).fold(0.0, f64::max)
    }

    pub fn with_warning(mut self, text: impl Into<String>) -> Self {
        self.warnings.push(text.into());
        self
    }
}

/// `E s_{3,l} + 12ν ∂_l E f^l + 6 ∫₀^l B̃₀` from the ensemble's combined
/// observable, whose spread gives the standard error directly.
pub fn khm_stationary_residual(stats: &EnsembleStats, spec: &ForcingSpec) -> KHMReport {
    let nu = stats.spec.nu;
    let l = stats.spec.l();
    let table = stats.table();
    let s3 = table.signed_for(3.0).expect("observable layout includes p = 3");
    let combined = stats.khm_combined();
    let dl = stats.correlation_dl();
    let forcing: Vec<f64> = l.iter().map(|&x| 6.0 * spec.integrated_correlation(x)).collect();
    KHMReport {
        residual: combined.iter().zip(&forcing).map(|(c, f)| c.mean() + f).collect(),
        stderr: combined.iter().map(|c| c.stderr()).collect(),
        terms: vec![
            s3.iter().map(|a| a.mean()).collect(),
            dl.iter().map(|a| 12.0 * nu * a.mean()).collect(),
            forcing,
        ],
        term_names: vec!["E s3".into(), "12 nu d_l E f".into(), "6 int B0".into()],
        warnings: Vec::new(),
        l,
    }
}

/// Ensemble means at one time for the dynamic identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhmSlice {
    pub t: f64,
    pub f: Vec<f64>,
    pub s3: Vec<f64>,
    pub d2f: Vec<f64>,
}

impl KhmSlice {
    pub fn from_stats(t: f64, stats: &EnsembleStats) -> Self {
        let table = stats.table();
        Self {
            t,
            f: stats.correlation().iter().map(|a| a.mean()).collect(),
            s3: table
                .signed_for(3.0)
                .expect("observable layout includes p = 3")
                .iter()
                .map(|a| a.mean())
                .collect(),
            d2f: stats.correlation_dl2().iter().map(|a| a.mean()).collect(),
        }
    }
}

/// Three-point derivative on a non-uniform grid (one-sided at the ends).
pub fn nonuniform_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 3 && y.len() == n);
    let three = |i0: usize, at: usize| {
        let (x0, x1, x2) = (x[i0], x[i0 + 1], x[i0 + 2]);
        let xa = x[at];
        // derivative of the Lagrange interpolant through three points
        y[i0] * (2.0 * xa - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y[i0 + 1] * (2.0 * xa - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y[i0 + 2] * (2.0 * xa - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|i| match i {
            0 => three(0, 0),
            i if i == n - 1 => three(n - 3, n - 1),
            i => three(i - 1, i),
        })
        .collect()
}

/// Residual of `d/dt E f^l = (1/6) ∂_l E s_{3,l} + 2ν ∂²_l E f^l + B̃₀(l)` at
/// the middle slice, with the time derivative by centered differences.
///
/// A warning is attached when the forward and backward differences disagree
/// by more than 10% of the largest term, meaning Δt is too coarse.
pub fn khm_dynamic_residual(l: &[f64], slices: [&KhmSlice; 3], spec: &ForcingSpec, nu: f64) -> Result<KHMReport> {
    let [a, b, c] = slices;
    if !(a.t < b.t && b.t < c.t) {
        return Err(Error::InvalidConfig(vec!["slices must be ordered in time".into()]));
    }
    if l.len() < 3 || [a, b, c].iter().any(|s| s.f.len() != l.len() || s.s3.len() != l.len() || s.d2f.len() != l.len()) {
        return Err(Error::LayoutMismatch("KHM slices do not match the l-grid".into()));
    }
    let dfdt: Vec<f64> = (0..l.len()).map(|i| (c.f[i] - a.f[i]) / (c.t - a.t)).collect();
    let ds3 = nonuniform_derivative(l, &b.s3);
    let transfer: Vec<f64> = ds3.iter().map(|d| d / 6.0).collect();
    let viscous: Vec<f64> = b.d2f.iter().map(|d| 2.0 * nu * d).collect();
    let forcing: Vec<f64> = l.iter().map(|&x| spec.correlation_b0(x)).collect();
    let residual: Vec<f64> = (0..l.len())
        .map(|i| dfdt[i] - transfer[i] - viscous[i] - forcing[i])
        .collect();
    let mut report = KHMReport {
        l: l.to_vec(),
        residual,
        stderr: vec![f64::NAN; l.len()],
        terms: vec![dfdt, transfer, viscous, forcing],
        term_names: vec![
            "d_t E f".into(),
            "(1/6) d_l E s3".into(),
            "2 nu d_ll E f".into(),
            "B0(l)".into(),
        ],
        warnings: Vec::new(),
    };
    let scale = report.scale().into_iter().fold(0.0, f64::max);
    let worst = (0..l.len())
        .map(|i| {
            let fwd = (c.f[i] - b.f[i]) / (c.t - b.t);
            let bwd = (b.f[i] - a.f[i]) / (b.t - a.t);
            (fwd - bwd).abs()
        })
        .fold(0.0, f64::max);
    if worst > 0.1 * scale {
        report = report.with_warning(format!(
            "time step too coarse: forward and backward differences differ by {worst:.3e} (scale {scale:.3e})"
        ));
    }
    Ok(report)
}
