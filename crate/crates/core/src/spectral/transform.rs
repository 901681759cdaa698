//! Collocation transforms between [`SpectralField`] coefficients and grid samples.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2, TAU};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::SpectralField;
use crate::error::{Error, Result};

/// Real-data DFT of length `n`.
///
/// Even lengths run a complex FFT of length `n/2` on the packed signal
/// `x[2m] + i x[2m+1]`; odd lengths fall back to a full complex FFT.
pub struct RealDft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    // e^{-2πik/n}, k < n/2 (even n only)
    twiddles: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RealDft {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "transform length must be at least 2");
        let mut planner = FftPlanner::new();
        let m = if n.is_multiple_of(2) { n / 2 } else { n };
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let twiddles = if n.is_multiple_of(2) {
            (0..n / 2)
                .map(|k| Complex64::from_polar(1.0, -TAU * k as f64 / n as f64))
                .collect()
        } else {
            Vec::new()
        };
        Self {
            n,
            forward,
            inverse,
            twiddles,
            buf: vec![Complex64::default(); m],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `spectrum[k] = Σ_j x_j e^{-2πijk/n}` for `k = 0..=n/2`.
    pub fn forward(&mut self, input: &[f64], spectrum: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(input.len(), n);
        assert_eq!(spectrum.len(), n / 2 + 1);
        if n % 2 == 1 {
            for (b, &x) in self.buf.iter_mut().zip(input) {
                *b = Complex64::new(x, 0.0);
            }
            self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
            spectrum.copy_from_slice(&self.buf[..=n / 2]);
            return;
        }
        let m = n / 2;
        for (b, pair) in self.buf.iter_mut().zip(input.chunks_exact(2)) {
            *b = Complex64::new(pair[0], pair[1]);
        }
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        let z = &self.buf;
        for k in 0..=m {
            let zk = z[k % m];
            let zc = z[(m - k) % m].conj();
            let even = (zk + zc) * 0.5;
            let odd = (zk - zc) * Complex64::new(0.0, -0.5);
            let w = if k < m { self.twiddles[k] } else { Complex64::new(-1.0, 0.0) };
            spectrum[k] = even + w * odd;
        }
    }

    /// `out[j] = Σ_{k=0}^{n-1} X_k e^{2πijk/n}` with `X` the Hermitian
    /// extension of `spectrum[0..=n/2]`. Imaginary parts of `X_0` (and of
    /// `X_{n/2}` for even `n`) are ignored.
    pub fn inverse(&mut self, spectrum: &[Complex64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(out.len(), n);
        assert_eq!(spectrum.len(), n / 2 + 1);
        if n % 2 == 1 {
            self.buf[0] = Complex64::new(spectrum[0].re, 0.0);
            for k in 1..=n / 2 {
                self.buf[k] = spectrum[k];
                self.buf[n - k] = spectrum[k].conj();
            }
            self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
            for (o, b) in out.iter_mut().zip(&self.buf) {
                *o = b.re;
            }
            return;
        }
        let m = n / 2;
        let x0 = Complex64::new(spectrum[0].re, 0.0);
        let xm = Complex64::new(spectrum[m].re, 0.0);
        for k in 0..m {
            let xk = if k == 0 { x0 } else { spectrum[k] };
            let xc = if k == 0 { xm } else { spectrum[m - k] }.conj();
            let even = (xk + xc) * 0.5;
            let odd = (xk - xc) * 0.5 * self.twiddles[k].conj();
            self.buf[k] = even + Complex64::new(0.0, 1.0) * odd;
        }
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (pair, z) in out.chunks_exact_mut(2).zip(&self.buf) {
            pair[0] = 2.0 * z.re;
            pair[1] = 2.0 * z.im;
        }
    }
}

/// Grid transform for fields of order `K` sampled at `x_j = j/n`.
pub struct Transform {
    dft: RealDft,
    k: usize,
    spectrum: Vec<Complex64>,
}

impl Transform {
    pub fn new(k: usize, n_grid: usize) -> Result<Self> {
        check_resolution(k, n_grid)?;
        Ok(Self {
            dft: RealDft::new(n_grid),
            k,
            spectrum: vec![Complex64::default(); n_grid / 2 + 1],
        })
    }

    pub fn n_grid(&self) -> usize {
        self.dft.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn to_physical_into(&mut self, field: &SpectralField, out: &mut [f64]) {
        assert_eq!(field.k(), self.k, "field order does not match transform");
        load_spectrum(field, &mut self.spectrum);
        self.dft.inverse(&self.spectrum, out);
    }

    /// Averages of the field over cells `[j/n, (j+1)/n)`.
    pub fn cell_averages_into(&mut self, field: &SpectralField, out: &mut [f64]) {
        assert_eq!(field.k(), self.k, "field order does not match transform");
        let n = self.n_grid() as f64;
        load_spectrum(field, &mut self.spectrum);
        for k in 1..=self.k {
            let theta = TAU * k as f64 / n;
            // (e^{iθ} − 1)/(iθ)
            let factor = Complex64::new(theta.sin(), 1.0 - theta.cos()) / theta;
            self.spectrum[k] *= factor;
        }
        self.dft.inverse(&self.spectrum, out);
    }

    pub fn from_physical(&mut self, values: &[f64]) -> SpectralField {
        let n = self.n_grid();
        self.dft.forward(values, &mut self.spectrum);
        let scale = SQRT_2 / n as f64;
        let (cos, sin) = self.spectrum[1..=self.k]
            .iter()
            .map(|x| (scale * x.re, -scale * x.im))
            .unzip();
        SpectralField::from_parts(cos, sin)
    }

    /// Forward spectrum of arbitrary grid data, for callers that post-process modes.
    pub(crate) fn forward_raw(&mut self, values: &[f64]) -> &[Complex64] {
        self.dft.forward(values, &mut self.spectrum);
        &self.spectrum
    }
}

fn load_spectrum(field: &SpectralField, spectrum: &mut [Complex64]) {
    spectrum.fill(Complex64::default());
    for (k, (c, s)) in field.cos().iter().zip(field.sin()).enumerate() {
        spectrum[k + 1] = Complex64::new(c * FRAC_1_SQRT_2, -s * FRAC_1_SQRT_2);
    }
}

pub(crate) fn check_resolution(k: usize, n_grid: usize) -> Result<()> {
    if n_grid < 2 * k + 1 {
        return Err(Error::Resolution {
            n_grid,
            required: 2 * k + 1,
        });
    }
    Ok(())
}

/// Samples `u(j/n)`, `j = 0..n`. Exact for the trigonometric polynomial.
pub fn to_physical(field: &SpectralField, n_grid: usize) -> Result<Vec<f64>> {
    let mut t = Transform::new(field.k(), n_grid)?;
    let mut out = vec![0.0; n_grid];
    t.to_physical_into(field, &mut out);
    Ok(out)
}

/// Interpolating coefficients of order `k` from samples at `j/n`.
pub fn from_physical(values: &[f64], k: usize) -> Result<SpectralField> {
    let mut t = Transform::new(k, values.len())?;
    Ok(t.from_physical(values))
}

/// Cell averages over `[j/n, (j+1)/n)`.
pub fn cell_averages(field: &SpectralField, n: usize) -> Result<Vec<f64>> {
    let mut t = Transform::new(field.k(), n)?;
    let mut out = vec![0.0; n];
    t.cell_averages_into(field, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * Complex64::from_polar(1.0, -TAU * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn packed_forward_matches_naive_dft() {
        for n in [2usize, 6, 8, 15, 16, 50, 63] {
            let x: Vec<f64> = (0..n).map(|j| ((j * 7 + 3) % 11) as f64 - 4.5 + (j as f64).sin()).collect();
            let mut dft = RealDft::new(n);
            let mut got = vec![Complex64::default(); n / 2 + 1];
            dft.forward(&x, &mut got);
            for (a, b) in got.iter().zip(naive_dft(&x)) {
                assert!((a - b).norm() < 1e-11, "n={n}: {a} vs {b}");
            }
            let mut back = vec![0.0; n];
            dft.inverse(&got, &mut back);
            for (a, b) in back.iter().zip(&x) {
                assert!((a / n as f64 - b).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn single_sine_mode() {
        let f = SpectralField::from_modes(3, &[(-1, 1.0)]);
        let u = to_physical(&f, 8).unwrap();
        for (j, v) in u.iter().enumerate() {
            let expected = SQRT_2 * (TAU * j as f64 / 8.0).sin();
            assert!((v - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let u = to_physical(&SpectralField::zeros(5), 16).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn resolution_is_checked() {
        assert!(matches!(
            to_physical(&SpectralField::zeros(4), 8),
            Err(Error::Resolution { required: 9, .. })
        ));
        assert!(to_physical(&SpectralField::zeros(4), 9).is_ok());
    }

    #[test]
    fn cell_average_of_cosine() {
        let n = 16;
        let f = SpectralField::from_modes(2, &[(2, 1.0)]);
        let avg = cell_averages(&f, n).unwrap();
        for (j, v) in avg.iter().enumerate() {
            let (a, b) = (j as f64 / n as f64, (j + 1) as f64 / n as f64);
            let exact = SQRT_2 * ((2.0 * TAU * b).sin() - (2.0 * TAU * a).sin()) / (2.0 * TAU) * n as f64;
            assert!((v - exact).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            coeffs in prop::collection::vec(-3.0f64..3.0, 2..40),
            extra in 1usize..9,
        ) {
            let k = coeffs.len() / 2;
            let field = SpectralField::from_parts(coeffs[..k].to_vec(), coeffs[k..2 * k].to_vec());
            let n = 2 * k + extra;
            let back = from_physical(&to_physical(&field, n).unwrap(), k).unwrap();
            prop_assert!(field.distance(&back) < 1e-12);
        }
    }
}
