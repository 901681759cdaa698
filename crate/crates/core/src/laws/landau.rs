//! Landau rescaling `w(τ, x) = μ u(μτ, x)`.
//!
//! If `u` solves the equation with viscosity ν and forcing `b_s`, then `w`
//! solves it with viscosity `νμ` and forcing `μ^{3/2} b_s`. Moments scale as
//! `S_p(w) = μ^p S_p(u)` and `ε_w = μ³ ε_u`, so a law `S_p = C (ε l)^q` can be
//! invariant only for `q = p/3`.

use serde::{Deserialize, Serialize};

use super::fit::{fit_column, indices_in, require_points};
use super::verdict::{weighted_ratio, LawVerdict};
use crate::entropy::GridField;
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::snapshot::{OwnedField, Snapshot};
use crate::statistics::{EnsembleStats, MomentAccumulator, ObservableSpec, StructureTable};

/// Forcing amplitudes of the rescaled problem, `μ^{3/2} b_s`.
pub fn rescaled_forcing(spec: &ForcingSpec, mu: f64) -> Result<ForcingSpec> {
    let f = mu.powf(1.5);
    ForcingSpec::new(spec.modes().iter().map(|m| (m.s, f * m.b)))
}

/// `w = μu` at `τ = t/μ`; each `τ` must be a multiple of `tau_every`.
pub fn rescale_snapshots(snapshots: &[Snapshot], mu: f64, tau_every: f64) -> Result<Vec<Snapshot>> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConfig(vec![format!("mu = {mu} must be positive")]));
    }
    snapshots
        .iter()
        .map(|s| {
            let tau = s.t / mu;
            let k = tau / tau_every;
            if (k - k.round()).abs() > 1e-9 * k.abs().max(1.0) {
                return Err(Error::CadenceMismatch { t: s.t });
            }
            Ok(scale_snapshot(s, mu))
        })
        .collect()
}

fn scale_snapshot(s: &Snapshot, mu: f64) -> Snapshot {
    let field = match &s.field {
        OwnedField::Spectral(f) => OwnedField::Spectral(f.scaled(mu)),
        OwnedField::Grid(g) => OwnedField::Grid(GridField::new(g.cells().iter().map(|v| mu * v).collect())),
    };
    Snapshot {
        trajectory: s.trajectory,
        t: s.t / mu,
        field,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauReport {
    pub mu: f64,
    pub snapshots: usize,
    /// Largest `|S_p(w) − μ^p S_p(u)| / (μ^p E|δu|^p)` over snapshots, `p`,
    /// `l` and both absolute and signed moments.
    pub max_moment_deviation: f64,
    /// Largest `|ε_w/(μ³ ε_u) − 1|` over snapshots.
    pub max_dissipation_deviation: f64,
    /// `(p, q_p)` with `q_p = ln(S_p(w)/S_p(u)) / ln(ε_w/ε_u)` from ensemble
    /// means, averaged over separations.
    pub exponents: Vec<(f64, f64)>,
}

/// Recomputes statistics for `u` (viscosity `spec.nu`) and `w = μu`
/// (viscosity `νμ`) and measures the scaling identities.
pub fn landau_identities(snapshots: &[Snapshot], mu: f64, spec: &ObservableSpec) -> Result<LandauReport> {
    let spec_w = ObservableSpec {
        nu: spec.nu * mu,
        ..spec.clone()
    };
    let rescaled: Vec<Snapshot> = snapshots.iter().map(|s| scale_snapshot(s, mu)).collect();
    let eps_at = spec.scalar_offset("dissipation").expect("dissipation is always observed");
    let mut su = EnsembleStats::new(spec.clone());
    let mut sw = EnsembleStats::new(spec_w.clone());
    let mut max_moment: f64 = 0.0;
    let mut max_eps: f64 = 0.0;
    for (u, w) in snapshots.iter().zip(&rescaled) {
        let ou = spec.observe(u.field.as_ref())?;
        let ow = spec_w.observe(w.field.as_ref())?;
        su.push(&ou)?;
        sw.push(&ow)?;
        let (mut tu, mut tw) = (EnsembleStats::new(spec.clone()), EnsembleStats::new(spec_w.clone()));
        tu.push(&ou)?;
        tw.push(&ow)?;
        let (tu, tw) = (tu.table(), tw.table());
        for (ip, &p) in spec.p_list.iter().enumerate() {
            let scale = mu.powf(p);
            let norm = &tu.absolute[ip];
            let mut cols = vec![(norm, &tw.absolute[ip])];
            if let (Some(a), Some(b)) = (&tu.signed[ip], &tw.signed[ip]) {
                cols.push((a, b));
            }
            for (a, b) in cols {
                for ((x, y), n) in a.iter().zip(b.iter()).zip(norm) {
                    // signed moments can vanish identically; measure against |δu|^p
                    let size = scale * n.mean();
                    if size > 0.0 {
                        max_moment = max_moment.max((y.mean() - scale * x.mean()).abs() / size);
                    }
                }
            }
        }
        let (eu, ew) = (ou[eps_at], ow[eps_at]);
        if eu != 0.0 {
            max_eps = max_eps.max((ew / (mu.powi(3) * eu) - 1.0).abs());
        }
    }
    let eps_ratio = sw.scalar("dissipation").map(|a| a.mean()).unwrap_or(f64::NAN)
        / su.scalar("dissipation").map(|a| a.mean()).unwrap_or(f64::NAN);
    let (tu, tw) = (su.table(), sw.table());
    let exponents = spec
        .p_list
        .iter()
        .enumerate()
        .map(|(ip, &p)| {
            let qs: Vec<f64> = tu.absolute[ip]
                .iter()
                .zip(&tw.absolute[ip])
                .filter(|(a, _)| a.mean() > 0.0)
                .map(|(a, b)| (b.mean() / a.mean()).ln() / eps_ratio.ln())
                .collect();
            (p, qs.iter().sum::<f64>() / qs.len() as f64)
        })
        .collect();
    Ok(LandauReport {
        mu,
        snapshots: snapshots.len(),
        max_moment_deviation: max_moment,
        max_dissipation_deviation: max_eps,
        exponents,
    })
}

/// For each `p`, the fitted inertial exponent `ζ_p` next to the invariance
/// requirement `q = p/3`; the selected `p` minimises `|ζ_p − p/3|`.
pub fn exponent_selection(table: &StructureTable, ps: &[f64], lo: f64, hi: f64) -> Result<(f64, Vec<(f64, f64, f64)>)> {
    let mut rows = Vec::new();
    for &p in ps {
        let column = table
            .absolute_for(p)
            .ok_or_else(|| Error::MissingObservables(vec![format!("absolute structure function for p = {p}")]))?;
        let fit = fit_column(&table.l, column, p, lo, hi)?;
        rows.push((p, fit.exponent, p / 3.0));
    }
    let best = rows
        .iter()
        .min_by(|a, b| (a.1 - a.2).abs().total_cmp(&(b.1 - b.2).abs()))
        .map(|r| r.0)
        .unwrap_or(f64::NAN);
    Ok((best, rows))
}

/// Weighted mean of `S^s_{3,l}/(ε^B l)` over `[lo, hi]` and its standard error.
pub fn c_star(table: &StructureTable, eps: &MomentAccumulator, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let s3 = table
        .signed_for(3.0)
        .ok_or_else(|| Error::MissingObservables(vec!["signed third moment (p = 3)".into()]))?;
    let idx = indices_in(&table.l, lo, hi);
    require_points(&idx, 6, lo, hi)?;
    let (r, se) = weighted_ratio(&table.l, s3, &idx, eps.mean());
    let rel_eps = eps.stderr() / eps.mean();
    Ok((r, (se * se + (r * rel_eps).powi(2)).sqrt()))
}

pub fn c_star_check(table: &StructureTable, eps: &MomentAccumulator, lo: f64, hi: f64, tolerance: f64) -> Result<LawVerdict> {
    let (c, se) = c_star(table, eps, lo, hi)?;
    Ok(LawVerdict::relative("landau_c_star", c, -12.0, tolerance, se, eps.count())
        .note(format!("eps^B = {:.5} ± {:.5}", eps.mean(), eps.stderr())))
}
