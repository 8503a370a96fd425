//! Limit operators and essential spectra.
//!
//! Coefficients fall into three classes. Constants are their own limits,
//! tables (a default plus finitely many exceptions) tend to their default,
//! and rules tend to their declared partial limits or, failing that, to
//! limits detected by sampling along rays `m·d` with `m = 2^k`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::interval::IntervalUnion;
use crate::lattice::Cell;
use crate::linalg::CMatrix;
use crate::operator::{BandOperator, CoefficientField, OperatorError};
use crate::symbol::{
    build_symbol, dispersion_curves, is_invertible_symbol, selfadjoint_bands, DispersionCurves,
    Invertibility, SymbolError,
};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("NotSOClass: coefficient '{rule}' changes by {increment:e} between neighbouring cells near {at}, above tolerance {tol:e}")]
    NotSOClass {
        rule: String,
        at: Cell,
        increment: f64,
        tol: f64,
    },
    #[error("NoConvergenceDetected: coefficient '{rule}' has no limit along {direction}: the last samples spread by {spread:e}")]
    NoConvergenceDetected {
        rule: String,
        direction: Cell,
        spread: f64,
    },
    #[error("DeclaredLimitMismatch: coefficient '{rule}' is {distance:e} away from its declared limit along {direction} at {at}")]
    DeclaredLimitMismatch {
        rule: String,
        direction: Cell,
        at: Cell,
        distance: f64,
    },
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Largest exponent k in the sampling sequence m = 2^k.
pub const MAX_DOUBLING: u32 = 48;
/// Number of successive samples that must agree to within tolerance.
pub const STABILITY_RUN: usize = 8;

#[derive(Clone, Debug)]
pub struct LimitOptions {
    /// Convergence and slow-oscillation tolerance.
    pub tol: f64,
    /// Sampling directions used in addition to ±e_k.
    pub extra_directions: Vec<Cell>,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            tol: 1e-6,
            extra_directions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LimitMember {
    pub operator: BandOperator,
    /// How the member arises: "periodic", "compact" or "direction [..]".
    pub provenance: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct LimitFamily {
    pub members: Vec<LimitMember>,
}

fn max_entry_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn rule_name(f: &CoefficientField) -> String {
    f.describe()
}

/// Largest change of `f` across one lattice step at `at`.
fn increment_at(f: &CoefficientField, at: &Cell) -> f64 {
    let here = f.at(at);
    (0..at.rank())
        .map(|k| max_entry_diff(&f.at(&(at + &Cell::unit(at.rank(), k))), &here))
        .fold(0.0, f64::max)
}

fn check_slow(f: &CoefficientField, at: &Cell, tol: f64) -> Result<(), LimitError> {
    let increment = increment_at(f, at);
    if increment > tol {
        return Err(LimitError::NotSOClass {
            rule: rule_name(f),
            at: at.clone(),
            increment,
            tol,
        });
    }
    Ok(())
}

/// Limit of `f(2^k · d)` detected from a stable run of samples.
fn detect_limit(f: &CoefficientField, d: &Cell, tol: f64) -> Result<CMatrix, LimitError> {
    let samples: Vec<CMatrix> = (0..=MAX_DOUBLING)
        .map(|k| f.at(&d.scaled(1 << k)))
        .collect();
    for start in 0..=samples.len() - STABILITY_RUN {
        let run = &samples[start..start + STABILITY_RUN];
        let spread = run
            .iter()
            .flat_map(|a| run.iter().map(move |b| max_entry_diff(a, b)))
            .fold(0.0, f64::max);
        if spread <= tol {
            let k = (start + STABILITY_RUN - 1) as u32;
            check_slow(f, &d.scaled(1 << k), tol)?;
            return Ok(run[STABILITY_RUN - 1].clone());
        }
    }
    check_slow(f, &d.scaled(1 << MAX_DOUBLING), tol)?;
    let tail = &samples[samples.len() - STABILITY_RUN..];
    let spread = tail
        .iter()
        .flat_map(|a| tail.iter().map(move |b| max_entry_diff(a, b)))
        .fold(0.0, f64::max);
    Err(LimitError::NoConvergenceDetected {
        rule: rule_name(f),
        direction: d.clone(),
        spread,
    })
}

/// A declared limit must be approached along its ray, and the coefficient must
/// be slowly oscillating there.
fn check_declared(
    f: &CoefficientField,
    d: &Cell,
    limit: &CMatrix,
    tol: f64,
) -> Result<(), LimitError> {
    let far = d.scaled(1 << (MAX_DOUBLING - 8));
    check_slow(f, &far, tol)?;
    let distance = max_entry_diff(&f.at(&far), limit);
    if distance > tol {
        return Err(LimitError::DeclaredLimitMismatch {
            rule: rule_name(f),
            direction: d.clone(),
            at: far,
            distance,
        });
    }
    Ok(())
}

fn field_limit(f: &CoefficientField, d: &Cell, tol: f64) -> Result<CMatrix, LimitError> {
    match f {
        CoefficientField::Rule(_) => match f.limit_along(d) {
            Some(limit) => {
                check_declared(f, d, &limit, tol)?;
                Ok(limit)
            }
            None => detect_limit(f, d, tol),
        },
        _ => Ok(f.limit_along(d).expect("constants and tables have limits")),
    }
}

/// The limit operators of `a` for the supported coefficient classes.
pub fn limit_family(a: &BandOperator, opts: &LimitOptions) -> Result<LimitFamily, LimitError> {
    if a.is_periodic() {
        return Ok(LimitFamily {
            members: vec![LimitMember {
                operator: a.clone(),
                provenance: vec!["periodic".into()],
            }],
        });
    }
    let rank = a.graph().rank();
    let rules: Vec<&CoefficientField> = a.terms().values().filter(|f| f.is_rule()).collect();
    if rules.is_empty() {
        let terms = a
            .terms()
            .iter()
            .map(|(delta, f)| {
                (
                    delta.clone(),
                    CoefficientField::Constant(f.limit_along(&Cell::zero(rank)).expect("table")),
                )
            })
            .collect();
        return Ok(LimitFamily {
            members: vec![LimitMember {
                operator: BandOperator::from_terms(a.graph().clone(), terms)?,
                provenance: vec!["compact".into()],
            }],
        });
    }

    let mut directions: BTreeSet<Cell> =
        rules.iter().flat_map(|f| f.declared_directions()).collect();
    if rules.iter().any(|f| f.declared_directions().is_empty()) {
        for k in 0..rank {
            let e = Cell::unit(rank, k);
            directions.insert(-&e);
            directions.insert(e);
        }
    }
    directions.extend(opts.extra_directions.iter().cloned());

    let mut members: Vec<(BTreeMap<Cell, CMatrix>, LimitMember)> = Vec::new();
    for d in &directions {
        if d.is_zero() || d.rank() != rank {
            continue;
        }
        let mut limits = BTreeMap::new();
        for (delta, f) in a.terms() {
            limits.insert(delta.clone(), field_limit(f, d, opts.tol)?);
        }
        let label = format!("direction {d}");
        if let Some((_, m)) = members.iter_mut().find(|(key, _)| *key == limits) {
            m.provenance.push(label);
            continue;
        }
        let terms = limits
            .iter()
            .map(|(delta, m)| (delta.clone(), CoefficientField::Constant(m.clone())))
            .collect();
        let operator = BandOperator::from_terms(a.graph().clone(), terms)?;
        members.push((
            limits,
            LimitMember {
                operator,
                provenance: vec![label],
            },
        ));
    }
    Ok(LimitFamily {
        members: members.into_iter().map(|(_, m)| m).collect(),
    })
}

#[derive(Clone, Debug)]
pub enum EssentialSpectrum {
    /// Self-adjoint case: the union and each member's bands, in family order.
    Bands {
        union: IntervalUnion,
        per_member: Vec<IntervalUnion>,
    },
    /// Some member is not self-adjoint: its spectrum is a set of complex curves.
    Curves(Vec<DispersionCurves>),
}

/// sp_ess A as the union of the spectra of its limit operators.
pub fn essential_spectrum(
    family: &LimitFamily,
    grid: usize,
    tol: f64,
) -> Result<EssentialSpectrum, LimitError> {
    let symbols = family
        .members
        .iter()
        .map(|m| build_symbol(&m.operator))
        .collect::<Result<Vec<_>, _>>()?;
    let hermitian = symbols
        .iter()
        .all(|s| s.is_hermitian(1e-12 * s.coefficient_sum().max(1.0)));
    if !hermitian {
        let curves = symbols
            .iter()
            .map(|s| dispersion_curves(s, grid, false))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(EssentialSpectrum::Curves(curves));
    }
    let per_member = symbols
        .iter()
        .map(|s| selfadjoint_bands(s, grid, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let union = per_member
        .iter()
        .fold(IntervalUnion::empty(), |acc, b| acc.union(b));
    Ok(EssentialSpectrum::Bands { union, per_member })
}

/// Bounded gaps of `bands` inside `[lo, hi]`.
pub fn gaps(bands: &IntervalUnion, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    bands.gaps(lo, hi)
}

#[derive(Clone, Debug)]
pub struct FredholmDecision {
    pub fredholm: bool,
    /// Per-member invertibility of σ − λ, in family order.
    pub members: Vec<Invertibility>,
    /// Index of the first member whose symbol fails, if any.
    pub failing: Option<usize>,
}

impl FredholmDecision {
    pub fn witness(&self) -> Option<&[f64]> {
        self.failing.map(|i| self.members[i].witness.as_slice())
    }
}

/// A − λI is Fredholm iff every limit operator minus λ has an invertible symbol.
pub fn fredholm_check(
    family: &LimitFamily,
    lambda: C64,
    grid: usize,
    tol: f64,
) -> Result<FredholmDecision, LimitError> {
    let mut members = Vec::new();
    for m in &family.members {
        let s = build_symbol(&m.operator)?.shifted(lambda);
        members.push(is_invertible_symbol(&s, grid, tol)?);
    }
    let failing = members.iter().position(|r| !r.invertible);
    Ok(FredholmDecision {
        fredholm: failing.is_none(),
        members,
        failing,
    })
}
