use serde::{Deserialize, Serialize};

/// Zero-mean periodic field `u = Σ_{0<|s|≤K} a_s e_s` stored by wavenumber.
///
/// `cos[k-1]` holds `a_k` and `sin[k-1]` holds `a_{-k}`. There is no slot for
/// `s = 0`, so the spatial mean is zero by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(k: usize) -> Self {
        assert!(k >= 1, "truncation order must be positive");
        Self {
            cos: vec![0.0; k],
            sin: vec![0.0; k],
        }
    }

    pub fn from_parts(cos: Vec<f64>, sin: Vec<f64>) -> Self {
        assert_eq!(cos.len(), sin.len());
        assert!(!cos.is_empty());
        Self { cos, sin }
    }

    /// Field with the given `(s, a_s)` entries, all others zero.
    pub fn from_modes(k: usize, modes: &[(i64, f64)]) -> Self {
        let mut f = Self::zeros(k);
        for &(s, a) in modes {
            f.set(s, a);
        }
        f
    }

    /// Truncation order `K`.
    pub fn k(&self) -> usize {
        self.cos.len()
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    pub fn cos_mut(&mut self) -> &mut [f64] {
        &mut self.cos
    }

    pub fn sin_mut(&mut self) -> &mut [f64] {
        &mut self.sin
    }

    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.cos, &mut self.sin)
    }

    pub fn get(&self, s: i64) -> f64 {
        let k = s.unsigned_abs() as usize;
        if s == 0 || k > self.k() {
            return 0.0;
        }
        if s > 0 {
            self.cos[k - 1]
        } else {
            self.sin[k - 1]
        }
    }

    /// Panics for `s = 0` or `|s| > K`.
    pub fn set(&mut self, s: i64, value: f64) {
        let k = s.unsigned_abs() as usize;
        assert!(s != 0 && k <= self.k(), "mode {s} outside 0 < |s| <= {}", self.k());
        if s > 0 {
            self.cos[k - 1] = value;
        } else {
            self.sin[k - 1] = value;
        }
    }

    /// `(s, a_s)` in the order `1, -1, 2, -2, …`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .flat_map(|(i, (&c, &s))| {
                let k = i as i64 + 1;
                [(k, c), (-k, s)]
            })
    }

    /// `a_k² + a_{-k}²` for `k = 1..=K`.
    pub fn shell_energy(&self) -> Vec<f64> {
        self.cos
            .iter()
            .zip(&self.sin)
            .map(|(c, s)| c * c + s * s)
            .collect()
    }

    /// `‖u‖² = Σ a_s²`.
    pub fn norm_squared(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|a| a * a).sum()
    }

    /// Copy truncated or zero-padded to order `k`.
    pub fn resized(&self, k: usize) -> Self {
        let mut out = Self::zeros(k);
        let m = k.min(self.k());
        out.cos[..m].copy_from_slice(&self.cos[..m]);
        out.sin[..m].copy_from_slice(&self.sin[..m]);
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            cos: self.cos.iter().map(|a| a * factor).collect(),
            sin: self.sin.iter().map(|a| a * factor).collect(),
        }
    }

    /// `‖self − other‖` over the modes both fields carry.
    pub fn distance(&self, other: &Self) -> f64 {
        let m = self.k().min(other.k());
        let d: f64 = (0..m)
            .map(|i| (self.cos[i] - other.cos[i]).powi(2) + (self.sin[i] - other.sin[i]).powi(2))
            .sum();
        d.sqrt()
    }

    /// First mode that is non-finite or exceeds `limit` in magnitude.
    pub fn find_blow_up(&self, limit: f64) -> Option<(i64, f64)> {
        self.modes().find(|(_, a)| !a.is_finite() || a.abs() > limit)
    }
}
