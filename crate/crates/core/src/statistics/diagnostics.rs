use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::snapshot::FieldRef;
use crate::spectral::{from_physical, to_physical, SpectralField};

/// Point values of a field on `n` grid points; grid fields are returned as is.
pub fn field_values(field: FieldRef<'_>, n: usize) -> Result<Vec<f64>> {
    match field {
        FieldRef::Spectral(f) => to_physical(f, n),
        FieldRef::Grid(g) => Ok(g.cells().to_vec()),
    }
}

/// Spectral form of a field; grid data is interpolated with `K = ⌊(n−1)/2⌋`.
pub fn spectral_form(field: FieldRef<'_>) -> Result<std::borrow::Cow<'_, SpectralField>> {
    match field {
        FieldRef::Spectral(f) => Ok(std::borrow::Cow::Borrowed(f)),
        FieldRef::Grid(g) => {
            let k = ((g.n() - 1) / 2).max(1);
            Ok(std::borrow::Cow::Owned(from_physical(g.cells(), k)?))
        }
    }
}

/// `f^l = ∫ u(x) u(x + l) dx` and its first two `l`-derivatives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub d2f: Vec<f64>,
}

/// Exact from the spectrum: `f^l = Σ_k (a_k² + a_{−k}²) cos(2πkl)`.
pub fn correlation_fl(field: &SpectralField, ls: &[f64]) -> Correlation {
    let energy = field.shell_energy();
    let mut out = Correlation {
        f: Vec::with_capacity(ls.len()),
        df: Vec::with_capacity(ls.len()),
        d2f: Vec::with_capacity(ls.len()),
    };
    for &l in ls {
        let (mut f, mut df, mut d2f) = (0.0, 0.0, 0.0);
        // rotate e^{2πikl} by multiplication, resynchronising every 64 shells
        let step = (TAU * l).sin_cos();
        let (mut s, mut c) = step;
        for (i, &e) in energy.iter().enumerate() {
            let w = TAU * (i + 1) as f64;
            f += e * c;
            df -= e * w * s;
            d2f -= e * w * w * c;
            if (i + 1) % 64 == 0 {
                (s, c) = (TAU * (i + 2) as f64 * l).sin_cos();
            } else {
                (s, c) = (s * step.1 + c * step.0, c * step.1 - s * step.0);
            }
        }
        out.f.push(f);
        out.df.push(df);
        out.d2f.push(d2f);
    }
    out
}

/// Homogeneous norm `‖∂^m u‖ = (Σ (2πs)^{2m} a_s²)^{1/2}`.
pub fn sobolev_norm(field: &SpectralField, m: u32) -> f64 {
    field
        .shell_energy()
        .iter()
        .enumerate()
        .map(|(i, e)| (TAU * (i + 1) as f64).powi(2 * m as i32) * e)
        .sum::<f64>()
        .sqrt()
}

/// `ν ‖u‖₁²`.
pub fn dissipation_rate(field: &SpectralField, nu: f64) -> f64 {
    nu * sobolev_norm(field, 1).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OleinikDiagnostics {
    /// `max (u_{j+1} − u_j)·n` over cells other than the largest upward jump.
    pub max_positive_slope: f64,
    /// The excluded upward jump `u_{j+1} − u_j` (not divided by the spacing).
    pub max_jump: f64,
    pub max_abs: f64,
    /// `Σ |u_{j+1} − u_j|`, the discrete `|u_x|₁`.
    pub total_variation: f64,
}

/// One-sided slope diagnostics from point values on a uniform periodic grid.
pub fn oleinik_diagnostics(values: &[f64]) -> OleinikDiagnostics {
    let n = values.len();
    let mut first = (f64::NEG_INFINITY, usize::MAX);
    let mut second = f64::NEG_INFINITY;
    let mut tv = 0.0;
    let mut max_abs: f64 = 0.0;
    for j in 0..n {
        let d = values[(j + 1) % n] - values[j];
        tv += d.abs();
        max_abs = max_abs.max(values[j].abs());
        if d > first.0 {
            second = first.0;
            first = (d, j);
        } else if d > second {
            second = d;
        }
    }
    OleinikDiagnostics {
        max_positive_slope: second.max(0.0) * n as f64,
        max_jump: first.0.max(0.0),
        max_abs,
        total_variation: tv,
    }
}
