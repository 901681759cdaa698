//! White-in-time forcing `ξ(t,x) = Σ b_s β_s(t) e_s(x)` on the unit circle.
//!
//! The real orthonormal basis is fixed as
//! `e_k(x) = √2 cos(2πkx)` and `e_{-k}(x) = √2 sin(2πkx)` for `k ≥ 1`.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{NoiseStream, MAX_FORCED_WAVENUMBER};

/// Basis function `e_s(x)`.
pub fn basis(s: i64, x: f64) -> f64 {
    debug_assert!(s != 0);
    let k = s.unsigned_abs() as f64;
    if s > 0 {
        SQRT_2 * (TAU * k * x).cos()
    } else {
        SQRT_2 * (TAU * k * x).sin()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedMode {
    pub s: i64,
    pub b: f64,
}

/// Finite set of forcing amplitudes `b_s`, `0 < |s| ≤ s_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    modes: Vec<ForcedMode>,
    s_max: usize,
}

impl ForcingSpec {
    /// Builds a spec from `(s, b_s)` pairs. Requires `B₀ > 0`.
    pub fn new(pairs: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        let spec = Self::from_pairs(pairs)?;
        if spec.b0() <= 0.0 {
            return Err(Error::InvalidForcing(
                "B0 = sum of b_s^2 must be positive".into(),
            ));
        }
        Ok(spec)
    }

    /// The degenerate spec `ξ ≡ 0`, for free-decay experiments.
    pub fn unforced() -> Self {
        Self {
            modes: Vec::new(),
            s_max: 1,
        }
    }

    /// `b_s = A |s|^{-decay}` on `1 ≤ |s| ≤ s_max` (both signs), with `A`
    /// chosen so that `B₀ = b0`.
    pub fn power_law(decay: f64, s_max: usize, b0: f64) -> Result<Self> {
        if s_max == 0 || !(b0 > 0.0) || !decay.is_finite() {
            return Err(Error::InvalidForcing(format!(
                "power law needs s_max >= 1, b0 > 0 and finite decay (got {s_max}, {b0}, {decay})"
            )));
        }
        let raw: f64 = (1..=s_max).map(|k| 2.0 * (k as f64).powf(-2.0 * decay)).sum();
        let amplitude = (b0 / raw).sqrt();
        let pairs = (1..=s_max as i64).flat_map(|k| {
            let b = amplitude * (k as f64).powf(-decay);
            [(k, b), (-k, b)]
        });
        Self::new(pairs)
    }

    /// The default experiment spectrum: `b_s ∝ |s|^{-2}`, `|s| ≤ 8`, `B₀ = 1`.
    pub fn default_spectrum() -> Self {
        Self::power_law(2.0, 8, 1.0).expect("default spectrum is valid")
    }

    fn from_pairs(pairs: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        let mut modes: Vec<ForcedMode> = Vec::new();
        for (s, b) in pairs {
            if s == 0 {
                return Err(Error::InvalidForcing(
                    "s = 0 would force a nonzero spatial mean".into(),
                ));
            }
            if s.unsigned_abs() as usize > MAX_FORCED_WAVENUMBER {
                return Err(Error::InvalidForcing(format!(
                    "|s| = {} exceeds the supported maximum {MAX_FORCED_WAVENUMBER}",
                    s.unsigned_abs()
                )));
            }
            if !b.is_finite() {
                return Err(Error::InvalidForcing(format!("b_{s} is not finite")));
            }
            if modes.iter().any(|m| m.s == s) {
                return Err(Error::InvalidForcing(format!("b_{s} listed twice")));
            }
            if b != 0.0 {
                modes.push(ForcedMode { s, b });
            }
        }
        modes.sort_by_key(|m| (m.s.unsigned_abs(), m.s < 0));
        let s_max = modes
            .iter()
            .map(|m| m.s.unsigned_abs() as usize)
            .max()
            .unwrap_or(1);
        Ok(Self { modes, s_max })
    }

    pub fn modes(&self) -> &[ForcedMode] {
        &self.modes
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn is_unforced(&self) -> bool {
        self.modes.is_empty()
    }

    /// `b_s`, zero when the mode is not forced.
    pub fn amplitude(&self, s: i64) -> f64 {
        self.modes
            .iter()
            .find(|m| m.s == s)
            .map_or(0.0, |m| m.b)
    }

    /// `B₀ = Σ b_s²`.
    pub fn b0(&self) -> f64 {
        self.spectral_weight(0)
    }

    /// `B_m = Σ |2πs|^{2m} b_s²`.
    pub fn spectral_weight(&self, m: u32) -> f64 {
        self.modes
            .iter()
            .map(|mode| (TAU * mode.s.unsigned_abs() as f64).powi(2 * m as i32) * mode.b * mode.b)
            .sum()
    }

    /// Forcing correlation `B̃₀(l) = Σ b_s² cos(2πsl)`.
    pub fn correlation_b0(&self, l: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m.b * m.b * (TAU * m.s as f64 * l).cos())
            .sum()
    }

    /// `∫₀^l B̃₀(r) dr = Σ b_s² sin(2πsl)/(2πs)`, in closed form.
    pub fn integrated_correlation(&self, l: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let w = TAU * m.s as f64;
                m.b * m.b * (w * l).sin() / w
            })
            .sum()
    }

    /// Brownian increments `b_s Δβ_s` over one step of length `dt`.
    pub fn sample_increment(&self, dt: f64, stream: &mut NoiseStream, step: u64) -> NoiseIncrement {
        assert!(dt > 0.0, "dt must be positive");
        let scale = dt.sqrt();
        let values = self
            .modes
            .iter()
            .map(|m| (m.s, m.b * scale * stream.standard_normal(step, m.s)))
            .collect();
        NoiseIncrement { dt, values }
    }
}

/// Spectral coefficients of `ξ(t+dt) − ξ(t)`; never carries an `s = 0` entry.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseIncrement {
    pub dt: f64,
    pub values: Vec<(i64, f64)>,
}

impl NoiseIncrement {
    pub fn get(&self, s: i64) -> f64 {
        self.values
            .iter()
            .find(|(t, _)| *t == s)
            .map_or(0.0, |(_, v)| *v)
    }
}
