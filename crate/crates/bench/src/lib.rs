//! Inputs shared by the kernel benchmarks.

use burgers_core::{GridField, SpectralField};

/// Deterministic field with a `|s|^-1` amplitude spectrum, roughly the shape
/// of a developed shock field.
pub fn shock_like(k: usize) -> SpectralField {
    let modes: Vec<(i64, f64)> = (1..=k as i64)
        .flat_map(|s| {
            let a = 0.3 / s as f64;
            [(s, a * (1.7 * s as f64).cos()), (-s, a * (0.9 * s as f64).sin())]
        })
        .collect();
    SpectralField::from_modes(k, &modes)
}

/// Cell averages of a single ramp with one shock.
pub fn sawtooth(n: usize) -> GridField {
    GridField::from_fn(n, |x| 0.5 - x)
}
