//! Essential spectrum of two light particles around a heavy nucleus.
//!
//! The operator on l²(X × X) is
//!
//! ```text
//! H = Δ ⊗ I + I ⊗ Δ + W1 ⊗ I + I ⊗ W2 + W12
//! ```
//!
//! with radial potentials decaying at infinity. Its essential spectrum is
//! sp H1 ∪ sp H2 ∪ sp H12, where H_j keeps only W_j and H12 keeps only the
//! interaction. The first two are tensor sums, so with S = sp Δ
//!
//! ```text
//! sp H_j = S + (S ∪ {discrete eigenvalues of Δ + W_j outside S})
//! ```
//!
//! Here S ∪ {discrete eigenvalues} is the whole spectrum of Δ + W_j: the
//! perturbation is compact, so the essential part stays S.
//!
//! sp H12 is only enclosed: 2S ⊆ sp H12 ⊆ 2S + [inf W12, sup W12].
//! The two-particle space is never built.

use std::sync::Arc;

use thiserror::Error;

use crate::finite_section::{
    ball_vertices, hermitian_spectrum, truncate, FiniteSectionError, WindowMatrix,
};
use crate::graph::{laplacian, PeriodicGraph, Vertex};
use crate::interval::{Interval, IntervalUnion};
use crate::operator::{schrodinger, BandOperator, OperatorError};
use crate::potential::{RadialProfile, ThreeParticleSpec};
use crate::symbol::{build_symbol, selfadjoint_bands, SymbolError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiparticleError {
    #[error("NotStabilized: {detail}")]
    NotStabilized { detail: String },
    #[error("InvalidSchedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    FiniteSection(#[from] FiniteSectionError),
}

/// Default window radius for the discrete eigenvalue search.
pub const DEFAULT_RADIUS: usize = 200;

/// A + B = {a + b}.
pub fn minkowski_sum(e: &IntervalUnion, f: &IntervalUnion) -> IntervalUnion {
    e.minkowski_sum(f)
}

/// Default schedule [⌈R/2⌉, R].
pub fn default_schedule(radius: usize) -> Vec<usize> {
    vec![radius.div_ceil(2), radius]
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteEigenvalue {
    pub value: f64,
    /// |value(R_last) − value(R_prev)|.
    pub drift: f64,
}

/// Eigenvalues of Δ + W outside `spectrum` ⊕ [−tol, tol], read off graph-ball
/// truncations around `anchor` for each radius in `schedule` and accepted
/// when the last two radii agree to within `tol`.
pub fn discrete_eigenvalues(
    g: &Arc<PeriodicGraph>,
    w: &RadialProfile,
    anchor: &Vertex,
    spectrum: &IntervalUnion,
    schedule: &[usize],
    tol: f64,
    cap: usize,
) -> Result<Vec<DiscreteEigenvalue>, MultiparticleError> {
    if schedule.len() < 2 || schedule.windows(2).any(|p| p[0] >= p[1]) {
        return Err(MultiparticleError::InvalidSchedule(format!(
            "need at least two increasing radii, got {schedule:?}"
        )));
    }
    if w.is_zero() {
        return Ok(Vec::new());
    }
    let h = schrodinger(g, &w.field(g, anchor))?;
    let outside = |r: usize| -> Result<Vec<f64>, MultiparticleError> {
        let window = WindowMatrix::from_vertices(&h, ball_vertices(&h, anchor, r), cap)?;
        Ok(hermitian_spectrum(&window)
            .into_iter()
            .filter(|&x| spectrum.distance(x) > tol)
            .collect())
    };
    let runs = schedule
        .iter()
        .map(|&r| outside(r))
        .collect::<Result<Vec<_>, _>>()?;
    let (prev, last) = (&runs[runs.len() - 2], &runs[runs.len() - 1]);
    let (r_prev, r_last) = (schedule[schedule.len() - 2], schedule[schedule.len() - 1]);
    if prev.len() != last.len() {
        return Err(MultiparticleError::NotStabilized {
            detail: format!(
                "{} candidate(s) at radius {r_prev} but {} at radius {r_last}: {last:?}",
                prev.len(),
                last.len()
            ),
        });
    }
    let mut out = Vec::new();
    for (a, b) in prev.iter().zip(last) {
        let drift = (a - b).abs();
        if drift >= tol {
            return Err(MultiparticleError::NotStabilized {
                detail: format!(
                    "candidate {b} drifts by {drift:e} between radii {r_prev} and {r_last}"
                ),
            });
        }
        out.push(DiscreteEigenvalue { value: *b, drift });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ThreeParticleOptions {
    pub grid: usize,
    pub tol: f64,
    pub schedule: Vec<usize>,
    pub cap: usize,
}

impl Default for ThreeParticleOptions {
    fn default() -> Self {
        ThreeParticleOptions {
            grid: 256,
            tol: 1e-6,
            schedule: default_schedule(DEFAULT_RADIUS),
            cap: crate::finite_section::DEFAULT_ROW_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ThreeParticleReport {
    /// S = sp Δ.
    pub laplacian_bands: IntervalUnion,
    pub discrete1: Vec<DiscreteEigenvalue>,
    pub discrete2: Vec<DiscreteEigenvalue>,
    pub h1: IntervalUnion,
    pub h2: IntervalUnion,
    /// 2S, contained in sp H12.
    pub h12_inner: IntervalUnion,
    /// 2S + [inf W12, sup W12], containing sp H12.
    pub h12_outer: IntervalUnion,
    /// sp H1 ∪ sp H2 ∪ 2S ⊆ sp_ess H.
    pub inner: IntervalUnion,
    /// sp_ess H ⊆ sp H1 ∪ sp H2 ∪ (2S + [inf W12, sup W12]).
    pub outer: IntervalUnion,
    /// [2 min S + m, 2 max S + M] with m, M the extreme potential values.
    pub sanity: (f64, f64),
    pub within_sanity: bool,
}

/// Spectrum of a single-particle channel: S + (S ∪ discrete points).
fn channel(s: &IntervalUnion, discrete: &[DiscreteEigenvalue]) -> IntervalUnion {
    let points = IntervalUnion::from_intervals(discrete.iter().map(|d| Interval::point(d.value)));
    minkowski_sum(s, &s.union(&points))
}

pub fn three_particle_essential_spectrum(
    g: &Arc<PeriodicGraph>,
    spec: &ThreeParticleSpec,
    opts: &ThreeParticleOptions,
) -> Result<ThreeParticleReport, MultiparticleError> {
    let anchor = spec
        .anchor(g)
        .map_err(|e| MultiparticleError::InvalidSchedule(e.to_string()))?;
    let s = selfadjoint_bands(&build_symbol(&laplacian(g))?, opts.grid, opts.tol)?;
    let discrete1 =
        discrete_eigenvalues(g, &spec.w1, &anchor, &s, &opts.schedule, opts.tol, opts.cap)?;
    let discrete2 =
        discrete_eigenvalues(g, &spec.w2, &anchor, &s, &opts.schedule, opts.tol, opts.cap)?;
    let h1 = channel(&s, &discrete1);
    let h2 = channel(&s, &discrete2);
    let two_s = minkowski_sum(&s, &s);
    let (w12_lo, w12_hi) = spec.w12.range();
    let h12_outer = minkowski_sum(&two_s, &IntervalUnion::single(w12_lo, w12_hi));
    let inner = h1.union(&h2).union(&two_s);
    let outer = h1.union(&h2).union(&h12_outer);

    let (m, big_m) = [spec.w1.range(), spec.w2.range(), spec.w12.range()]
        .into_iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
    let (s_lo, s_hi) = (s.min().unwrap_or(0.0), s.max().unwrap_or(0.0));
    let sanity = (2.0 * s_lo + m, 2.0 * s_hi + big_m);
    let slack = 4.0 * opts.tol;
    let within_sanity = outer.min().is_none_or(|lo| lo >= sanity.0 - slack)
        && outer.max().is_none_or(|hi| hi <= sanity.1 + slack);

    Ok(ThreeParticleReport {
        laplacian_bands: s,
        discrete1,
        discrete2,
        h1,
        h2,
        h12_inner: two_s,
        h12_outer,
        inner,
        outer,
        sanity,
        within_sanity,
    })
}

/// [min, max] eigenvalue of the cube truncation of radius R, an inner
/// estimate of the numerical range [a, b] of a self-adjoint operator.
pub fn rayleigh_bounds(
    a: &BandOperator,
    radius: usize,
    cap: usize,
) -> Result<(f64, f64), MultiparticleError> {
    let values = hermitian_spectrum(&truncate(a, radius, cap)?);
    match (values.first(), values.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Ok((0.0, 0.0)),
    }
}
