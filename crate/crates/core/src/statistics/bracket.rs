use serde::{Deserialize, Serialize};

use super::accumulator::{CompensatedSum, MomentAccumulator};
use crate::error::{Error, Result};

/// Averaging window `[start, start + length]` in simulation time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub start: f64,
    pub length: f64,
}

impl BracketSpec {
    pub fn new(start: f64, length: f64) -> Result<Self> {
        if !(length > 0.0) || !(start >= 0.0) {
            return Err(Error::InvalidConfig(vec![format!(
                "bracket needs T >= 0 and sigma > 0, got T = {start}, sigma = {length}"
            )]));
        }
        Ok(Self { start, length })
    }

    pub fn end(&self) -> f64 {
        self.start + self.length
    }

    fn tolerance(&self) -> f64 {
        1e-9 * self.end().max(1.0)
    }
}

/// Streaming trapezoid average over a window of vector-valued samples.
///
/// Samples must arrive in increasing time; segments straddling the window
/// edges are clipped using the linear interpolant.
#[derive(Clone, Debug)]
pub struct WindowAverager {
    spec: BracketSpec,
    integral: Vec<CompensatedSum>,
    last: Option<(f64, Vec<f64>)>,
    covered_from: Option<f64>,
    covered_to: f64,
}

impl WindowAverager {
    pub fn new(spec: BracketSpec, dim: usize) -> Self {
        Self {
            spec,
            integral: vec![CompensatedSum::default(); dim],
            last: None,
            covered_from: None,
            covered_to: f64::NEG_INFINITY,
        }
    }

    pub fn dim(&self) -> usize {
        self.integral.len()
    }

    pub fn push(&mut self, t: f64, values: &[f64]) {
        assert_eq!(values.len(), self.dim());
        let (a, b) = (self.spec.start, self.spec.end());
        if let Some((t0, v0)) = &self.last {
            let (t0, t1) = (*t0, t);
            assert!(t1 > t0, "samples must increase in time");
            let lo = t0.max(a);
            let hi = t1.min(b);
            if hi > lo {
                // ∫_lo^hi of the linear interpolant = (hi − lo) · value at the midpoint
                let w = ((lo + hi) / 2.0 - t0) / (t1 - t0);
                for ((acc, x0), x1) in self.integral.iter_mut().zip(v0).zip(values) {
                    acc.add((hi - lo) * ((1.0 - w) * x0 + w * x1));
                }
                if self.covered_from.is_none() {
                    self.covered_from = Some(lo);
                }
                self.covered_to = hi;
            }
        } else if (t - a).abs() <= self.spec.tolerance() {
            self.covered_from = Some(t);
            self.covered_to = t;
        }
        match &mut self.last {
            Some((t0, v0)) => {
                *t0 = t;
                v0.copy_from_slice(values);
            }
            None => self.last = Some((t, values.to_vec())),
        }
    }

    /// `(1/σ) ∫_T^{T+σ} f dt`, or the coverage gap.
    pub fn finish(&self) -> Result<Vec<f64>> {
        let tol = self.spec.tolerance();
        let from = self.covered_from.unwrap_or(f64::INFINITY);
        if from > self.spec.start + tol || self.covered_to < self.spec.end() - tol {
            return Err(Error::WindowNotCovered(format!(
                "window [{}, {}] but samples cover [{}, {}]",
                self.spec.start,
                self.spec.end(),
                if from.is_finite() { from } else { f64::NAN },
                self.covered_to
            )));
        }
        Ok(self.integral.iter().map(|s| s.value() / self.spec.length).collect())
    }
}

/// Trapezoid window average of one scalar series `(t, value)`.
pub fn time_average(series: &[(f64, f64)], spec: BracketSpec) -> Result<f64> {
    let mut avg = WindowAverager::new(spec, 1);
    for &(t, v) in series {
        avg.push(t, &[v]);
    }
    Ok(avg.finish()?[0])
}

/// `⟨⟨f⟩⟩`: window average per trajectory, then the ensemble mean with its
/// across-trajectory standard error.
pub fn bracket_average(trajectories: &[Vec<(f64, f64)>], spec: BracketSpec) -> Result<MomentAccumulator> {
    let mut acc = MomentAccumulator::new();
    for series in trajectories {
        acc.push(time_average(series, spec)?);
    }
    Ok(acc)
}
