//! Per-snapshot observable vectors and their ensemble reduction.
//!
//! A snapshot is reduced to one flat `Vec<f64>` whose layout is fixed by
//! [`ObservableSpec`]; trajectories time-average these vectors over the
//! bracket window and the ensemble keeps one [`MomentAccumulator`] per entry.

use serde::{Deserialize, Serialize};

use super::accumulator::{merge_all, MomentAccumulator};
use super::diagnostics::{correlation_fl, field_values, oleinik_diagnostics, sobolev_norm, spectral_form};
use super::increments::{increment_moments, LGrid, StructureTable};
use crate::error::{Error, Result};
use crate::snapshot::FieldRef;

pub const SCALAR_NAMES: [&str; 7] = [
    "l2_squared",
    "h1",
    "dissipation",
    "max_positive_slope",
    "max_jump",
    "max_abs",
    "total_variation",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub l_grid: LGrid,
    pub p_list: Vec<f64>,
    /// Viscosity used in the KHM combination `s₃ + 12ν ∂_l f`.
    pub nu: f64,
}

/// Offsets of each block inside an observable vector.
#[derive(Clone, Copy, Debug)]
struct Layout {
    nl: usize,
    np: usize,
    n_signed: usize,
}

impl Layout {
    fn absolute(&self, ip: usize) -> usize {
        ip * self.nl
    }
    fn signed(&self, is: usize) -> usize {
        (self.np + is) * self.nl
    }
    fn positive_cubic(&self) -> usize {
        (self.np + self.n_signed) * self.nl
    }
    fn khm(&self) -> usize {
        self.positive_cubic() + self.nl
    }
    fn f(&self) -> usize {
        self.khm() + self.nl
    }
    fn df(&self) -> usize {
        self.f() + self.nl
    }
    fn d2f(&self) -> usize {
        self.df() + self.nl
    }
    fn scalars(&self) -> usize {
        self.d2f() + self.nl
    }
    fn len(&self) -> usize {
        self.scalars() + SCALAR_NAMES.len()
    }
}

impl ObservableSpec {
    pub fn new(l_grid: LGrid, p_list: Vec<f64>, nu: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !p_list.contains(&3.0) {
            problems.push("p_list must contain 3 (needed for the KHM observable)".into());
        }
        if p_list.iter().any(|&p| !(p > 0.0)) {
            problems.push("p_list entries must be positive".into());
        }
        if !(nu >= 0.0) {
            problems.push(format!("nu = {nu} must be non-negative"));
        }
        if l_grid.is_empty() {
            problems.push("l-grid is empty".into());
        }
        if problems.is_empty() {
            Ok(Self { l_grid, p_list, nu })
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    fn layout(&self) -> Layout {
        Layout {
            nl: self.l_grid.len(),
            np: self.p_list.len(),
            n_signed: self.p_list.iter().filter(|p| p.fract() == 0.0).count(),
        }
    }

    pub fn dim(&self) -> usize {
        self.layout().len()
    }

    pub fn l(&self) -> Vec<f64> {
        self.l_grid.values()
    }

    /// Position of a named scalar inside an observable vector.
    pub fn scalar_offset(&self, name: &str) -> Option<usize> {
        let i = SCALAR_NAMES.iter().position(|&n| n == name)?;
        Some(self.layout().scalars() + i)
    }

    /// All per-snapshot observables of one field.
    pub fn observe(&self, field: FieldRef<'_>) -> Result<Vec<f64>> {
        let lay = self.layout();
        let values = field_values(field, self.l_grid.n())?;
        let moments = increment_moments(&values, &self.l_grid, &self.p_list)?;
        let spectral = spectral_form(field)?;
        let ls = self.l();
        let corr = correlation_fl(&spectral, &ls);
        let ole = oleinik_diagnostics(&values);
        let mut out = Vec::with_capacity(lay.len());
        for row in &moments.absolute {
            out.extend_from_slice(row);
        }
        for row in moments.signed.iter().flatten() {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&moments.positive_cubic);
        let ip3 = self.p_list.iter().position(|&p| p == 3.0).expect("validated");
        let s3 = moments.signed[ip3].as_ref().expect("integer p");
        out.extend(s3.iter().zip(&corr.df).map(|(s, df)| s + 12.0 * self.nu * df));
        out.extend_from_slice(&corr.f);
        out.extend_from_slice(&corr.df);
        out.extend_from_slice(&corr.d2f);
        let h1 = sobolev_norm(&spectral, 1).powi(2);
        out.extend_from_slice(&[
            spectral.norm_squared(),
            h1,
            self.nu * h1,
            ole.max_positive_slope,
            ole.max_jump,
            ole.max_abs,
            ole.total_variation,
        ]);
        debug_assert_eq!(out.len(), lay.len());
        Ok(out)
    }
}

/// One accumulator per observable entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub spec: ObservableSpec,
    pub cells: Vec<MomentAccumulator>,
}

impl EnsembleStats {
    pub fn new(spec: ObservableSpec) -> Self {
        let dim = spec.dim();
        Self {
            spec,
            cells: vec![MomentAccumulator::new(); dim],
        }
    }

    pub fn count(&self) -> u64 {
        self.cells.first().map_or(0, |c| c.count())
    }

    pub fn push(&mut self, observables: &[f64]) -> Result<()> {
        if observables.len() != self.cells.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} observables for a layout of {}",
                observables.len(),
                self.cells.len()
            )));
        }
        for (c, &v) in self.cells.iter_mut().zip(observables) {
            c.push(v);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &EnsembleStats) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::LayoutMismatch("observable specs differ".into()));
        }
        merge_all(&mut self.cells, &other.cells)
    }

    fn block(&self, start: usize) -> &[MomentAccumulator] {
        &self.cells[start..start + self.spec.l_grid.len()]
    }

    pub fn table(&self) -> StructureTable {
        let lay = self.spec.layout();
        let mut table = StructureTable::new(self.spec.l(), self.spec.p_list.clone());
        let mut is = 0;
        for (ip, &p) in self.spec.p_list.iter().enumerate() {
            table.absolute[ip] = self.block(lay.absolute(ip)).to_vec();
            if p.fract() == 0.0 {
                table.signed[ip] = Some(self.block(lay.signed(is)).to_vec());
                is += 1;
            }
        }
        table.positive_cubic = self.block(lay.positive_cubic()).to_vec();
        table
    }

    /// `s₃ + 12ν ∂_l f^l` per separation.
    pub fn khm_combined(&self) -> &[MomentAccumulator] {
        self.block(self.spec.layout().khm())
    }

    pub fn correlation(&self) -> &[MomentAccumulator] {
        self.block(self.spec.layout().f())
    }

    pub fn correlation_dl(&self) -> &[MomentAccumulator] {
        self.block(self.spec.layout().df())
    }

    pub fn correlation_dl2(&self) -> &[MomentAccumulator] {
        self.block(self.spec.layout().d2f())
    }

    pub fn scalar(&self, name: &str) -> Option<&MomentAccumulator> {
        self.cells.get(self.spec.scalar_offset(name)?)
    }
}

/// Energy-budget terms at one sample time of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetPoint {
    pub t: f64,
    /// `½‖u‖²`
    pub energy: f64,
    /// `∫₀^t ν‖u‖₁² ds`
    pub dissipated: f64,
    /// `Σ_s b_s ∫₀^t a_s dβ_s`
    pub martingale: f64,
}

/// Ensemble accumulators of [`BudgetPoint`] terms at common sample times.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetSeries {
    pub times: Vec<f64>,
    /// `½‖u(0)‖²`
    pub initial_energy: MomentAccumulator,
    pub energy: Vec<MomentAccumulator>,
    pub dissipated: Vec<MomentAccumulator>,
    /// Pathwise residual `½‖u‖² − ½‖u₀‖² + ∫ν‖u‖₁² − ½B₀t − M_t`.
    pub pathwise: Vec<MomentAccumulator>,
}

impl BudgetSeries {
    /// Adds one trajectory; `initial_energy` is `½‖u(0)‖²`.
    pub fn push(&mut self, points: &[BudgetPoint], initial_energy: f64, b0: f64) -> Result<()> {
        if self.times.is_empty() {
            self.times = points.iter().map(|p| p.t).collect();
            self.energy = vec![MomentAccumulator::new(); points.len()];
            self.dissipated = self.energy.clone();
            self.pathwise = self.energy.clone();
        }
        if points.len() != self.times.len() || points.iter().zip(&self.times).any(|(p, &t)| p.t != t) {
            return Err(Error::LayoutMismatch("budget series sampled at different times".into()));
        }
        self.initial_energy.push(initial_energy);
        for (i, p) in points.iter().enumerate() {
            self.energy[i].push(p.energy);
            self.dissipated[i].push(p.dissipated);
            self.pathwise[i].push(p.energy - initial_energy + p.dissipated - 0.5 * b0 * p.t - p.martingale);
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.initial_energy.count()
    }

    pub fn merge(&mut self, other: &BudgetSeries) -> Result<()> {
        if other.times.is_empty() {
            return Ok(());
        }
        if self.times.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if self.times != other.times {
            return Err(Error::LayoutMismatch("budget series sampled at different times".into()));
        }
        self.initial_energy.merge(&other.initial_energy);
        merge_all(&mut self.energy, &other.energy)?;
        merge_all(&mut self.dissipated, &other.dissipated)?;
        merge_all(&mut self.pathwise, &other.pathwise)
    }
}
