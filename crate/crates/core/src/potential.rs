//! Potential description files.
//!
//! A potential assigns a real value to every vertex `(j, α)`. Files are TOML
//! with a `kind` key; orbits are numbered from 1.
//!
//! ```toml
//! kind = "periodic"          # v(j, α) = values[j]
//! values = [1.0, 3.0]
//!
//! kind = "table"             # default per orbit, overridden at listed vertices
//! default = [0.0]
//! entries = [[1, [0], -0.75]]
//!
//! kind = "ray"               # rank 1: v(j, α) = c[j] + d[j]·α/(1+|α|)
//! c = [2.0, 2.0]
//! d = [1.0, 1.0]
//! auto = false               # true: detect the limits by sampling instead
//!
//! kind = "radial"            # v(x) = w(ρ(x, anchor)), w(z) → 0
//! profile = [-0.75]          # w(0), w(1), …; zero afterwards
//! exponential = { amplitude = 1.0, rate = 0.5 }   # or w(z) = a·e^(−rate·z)
//! anchor = [1, [0]]
//!
//! kind = "oscillating"       # v(j, α) = c[j] + d[j]·cos(frequency·|α|^power)
//! c = [0.0]
//! d = [1.0]
//! frequency = 1.0
//! power = 0.5
//! ```
//!
//! Every kind except `table` also accepts `entries`, which are added to the
//! base potential as a finitely supported perturbation.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::graph::{PeriodicGraph, Vertex};
use crate::lattice::Cell;
use crate::linalg::CMatrix;
use crate::operator::{schrodinger, BandOperator, CoefficientField, FnRule, OperatorError};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("Parse: {0}")]
    Parse(String),
    #[error("InvalidPotential: {0}")]
    Invalid(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Profiles are cut off where |w| first stays below this for good.
pub const RADIAL_CUTOFF: f64 = 1e-14;

/// `[orbit, cell, value]` with the orbit numbered from 1.
pub type Entry = (usize, Vec<i64>, f64);

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Periodic {
        values: Vec<f64>,
        #[serde(default)]
        entries: Vec<Entry>,
    },
    Table {
        default: Vec<f64>,
        #[serde(default)]
        entries: Vec<Entry>,
    },
    Ray {
        c: Vec<f64>,
        d: Vec<f64>,
        #[serde(default)]
        auto: bool,
        #[serde(default)]
        entries: Vec<Entry>,
    },
    Radial {
        profile: Option<Vec<f64>>,
        exponential: Option<Exponential>,
        anchor: Option<(usize, Vec<i64>)>,
        #[serde(default)]
        entries: Vec<Entry>,
    },
    Oscillating {
        c: Vec<f64>,
        d: Vec<f64>,
        frequency: f64,
        power: f64,
        #[serde(default)]
        entries: Vec<Entry>,
    },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Exponential {
    pub amplitude: f64,
    pub rate: f64,
}

/// A decaying radial profile w: {0, 1, 2, …} → R.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RadialProfile {
    pub profile: Option<Vec<f64>>,
    pub exponential: Option<Exponential>,
}

impl RadialProfile {
    pub fn table(values: Vec<f64>) -> Self {
        RadialProfile {
            profile: Some(values),
            exponential: None,
        }
    }

    pub fn zero() -> Self {
        Self::table(Vec::new())
    }

    fn validate(&self) -> Result<(), PotentialError> {
        match (&self.profile, &self.exponential) {
            (Some(_), Some(_)) => Err(PotentialError::Invalid(
                "give either profile or exponential, not both".into(),
            )),
            (None, Some(e)) if e.rate.is_nan() || e.rate <= 0.0 || !e.amplitude.is_finite() => Err(
                PotentialError::Invalid(format!("exponential rate {} must be positive", e.rate)),
            ),
            (Some(p), None) if p.iter().any(|x| !x.is_finite()) => Err(PotentialError::Invalid(
                "profile values must be finite".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn value(&self, z: usize) -> f64 {
        match (&self.profile, &self.exponential) {
            (Some(p), _) => p.get(z).copied().unwrap_or(0.0),
            (None, Some(e)) if z <= self.support() => e.amplitude * (-e.rate * z as f64).exp(),
            _ => 0.0,
        }
    }

    /// Largest distance at which the profile is taken to be nonzero.
    pub fn support(&self) -> usize {
        match (&self.profile, &self.exponential) {
            (Some(p), _) => p.iter().rposition(|&x| x != 0.0).map_or(0, |i| i),
            (None, Some(e)) if e.amplitude.abs() > RADIAL_CUTOFF => {
                ((e.amplitude.abs() / RADIAL_CUTOFF).ln() / e.rate).floor() as usize
            }
            _ => 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        (0..=self.support()).all(|z| self.value(z) == 0.0)
    }

    /// (inf, sup) of the profile values together with 0, the value at infinity.
    pub fn range(&self) -> (f64, f64) {
        (0..=self.support())
            .map(|z| self.value(z))
            .fold((0.0, 0.0), |(lo, hi), w| (lo.min(w), hi.max(w)))
    }

    /// The diagonal field x ↦ w(ρ(x, anchor)), a finite table over the ball
    /// of radius `support()`.
    pub fn field(&self, g: &PeriodicGraph, anchor: &Vertex) -> CoefficientField {
        let n = g.orbits();
        let mut entries: BTreeMap<Cell, CMatrix> = BTreeMap::new();
        if !self.is_zero() {
            for (v, dist) in g.ball(anchor, self.support()) {
                let w = self.value(dist);
                if w != 0.0 {
                    entries
                        .entry(v.cell.clone())
                        .or_insert_with(|| CMatrix::zeros(n, n))[(v.orbit, v.orbit)] =
                        C64::new(w, 0.0);
                }
            }
        }
        CoefficientField::Table {
            default: CMatrix::zeros(n, n),
            entries,
        }
    }
}

pub fn parse_potential(text: &str) -> Result<PotentialSpec, PotentialError> {
    toml::from_str(text).map_err(|e| PotentialError::Parse(e.message().to_string()))
}

fn diag(values: impl IntoIterator<Item = f64>) -> CMatrix {
    let v: Vec<f64> = values.into_iter().collect();
    CMatrix::from_fn(v.len(), v.len(), |i, j| {
        if i == j {
            C64::new(v[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn check_len(what: &str, v: &[f64], n: usize) -> Result<(), PotentialError> {
    if v.len() != n {
        return Err(PotentialError::Invalid(format!(
            "{what} has {} value(s) but the graph has {n} orbit(s)",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(PotentialError::Invalid(format!(
            "{what} contains a non-finite value"
        )));
    }
    Ok(())
}

fn vertex(g: &PeriodicGraph, orbit: usize, cell: &[i64]) -> Result<Vertex, PotentialError> {
    if orbit == 0 || orbit > g.orbits() {
        return Err(PotentialError::Invalid(format!(
            "orbit {orbit} is outside 1..={}",
            g.orbits()
        )));
    }
    if cell.len() != g.rank() {
        return Err(PotentialError::Invalid(format!(
            "cell {cell:?} does not have rank {}",
            g.rank()
        )));
    }
    Ok(Vertex::new(orbit - 1, cell.to_vec()))
}

/// Per-cell diagonal matrices from entries; later entries for a vertex win.
fn entry_table(
    g: &PeriodicGraph,
    entries: &[Entry],
    base: impl Fn(&Cell) -> CMatrix,
) -> Result<BTreeMap<Cell, CMatrix>, PotentialError> {
    let mut table: BTreeMap<Cell, CMatrix> = BTreeMap::new();
    for (orbit, cell, value) in entries {
        let v = vertex(g, *orbit, cell)?;
        if !value.is_finite() {
            return Err(PotentialError::Invalid("entry value must be finite".into()));
        }
        let m = table.entry(v.cell.clone()).or_insert_with(|| base(&v.cell));
        m[(v.orbit, v.orbit)] = C64::new(*value, 0.0);
    }
    Ok(table)
}

impl PotentialSpec {
    fn extra_entries(&self) -> &[Entry] {
        match self {
            PotentialSpec::Periodic { entries, .. }
            | PotentialSpec::Table { entries, .. }
            | PotentialSpec::Ray { entries, .. }
            | PotentialSpec::Radial { entries, .. }
            | PotentialSpec::Oscillating { entries, .. } => entries,
        }
    }

    /// The potential as a diagonal coefficient field on `g`.
    pub fn field(&self, g: &PeriodicGraph) -> Result<CoefficientField, PotentialError> {
        let n = g.orbits();
        let base = match self {
            PotentialSpec::Table { default, entries } => {
                check_len("default", default, n)?;
                let d = diag(default.iter().copied());
                let table = entry_table(g, entries, |_| d.clone())?;
                return Ok(CoefficientField::Table {
                    default: d,
                    entries: table,
                });
            }
            PotentialSpec::Periodic { values, .. } => {
                check_len("values", values, n)?;
                CoefficientField::Constant(diag(values.iter().copied()))
            }
            PotentialSpec::Ray { c, d, auto, .. } => {
                check_len("c", c, n)?;
                check_len("d", d, n)?;
                if g.rank() != 1 {
                    return Err(PotentialError::Invalid(
                        "ray potentials are defined on rank-1 lattices".into(),
                    ));
                }
                ray_field(c, d, *auto)
            }
            PotentialSpec::Radial {
                profile,
                exponential,
                anchor,
                ..
            } => {
                let profile = RadialProfile {
                    profile: profile.clone(),
                    exponential: *exponential,
                };
                profile.validate()?;
                let anchor = match anchor {
                    Some((j, cell)) => vertex(g, *j, cell)?,
                    None => Vertex::new(0, Cell::zero(g.rank())),
                };
                profile.field(g, &anchor)
            }
            PotentialSpec::Oscillating {
                c,
                d,
                frequency,
                power,
                ..
            } => {
                check_len("c", c, n)?;
                check_len("d", d, n)?;
                if !frequency.is_finite() || !power.is_finite() || *power < 0.0 {
                    return Err(PotentialError::Invalid(
                        "frequency must be finite and power nonnegative".into(),
                    ));
                }
                oscillating_field(c, d, *frequency, *power)
            }
        };
        let extra = self.extra_entries();
        if extra.is_empty() {
            return Ok(base);
        }
        let zero = CMatrix::zeros(n, n);
        let bump = CoefficientField::Table {
            default: zero.clone(),
            entries: entry_table(g, extra, |_| zero.clone())?,
        };
        Ok(base.add(&bump))
    }

    /// Δ_Γ + vI on `g`.
    pub fn operator(&self, g: &Arc<PeriodicGraph>) -> Result<BandOperator, PotentialError> {
        Ok(schrodinger(g, &self.field(g)?)?)
    }
}

fn ray_field(c: &[f64], d: &[f64], auto: bool) -> CoefficientField {
    let (c, d) = (c.to_vec(), d.to_vec());
    let bound = c
        .iter()
        .zip(&d)
        .map(|(a, b)| a.abs() + b.abs())
        .fold(0.0, f64::max);
    let plus = diag(c.iter().zip(&d).map(|(a, b)| a + b));
    let minus = diag(c.iter().zip(&d).map(|(a, b)| a - b));
    let (cc, dd) = (c.clone(), d.clone());
    let rule = FnRule::new(
        "ray c + d·α/(1+|α|)",
        c.len(),
        bound,
        move |cell: &Cell| {
            let a = cell.0[0] as f64;
            let s = a / (1.0 + a.abs());
            diag(cc.iter().zip(&dd).map(|(c, d)| c + d * s))
        },
    );
    if auto {
        rule.into_field()
    } else {
        rule.with_limit(Cell(vec![1]), plus)
            .with_limit(Cell(vec![-1]), minus)
            .into_field()
    }
}

fn oscillating_field(c: &[f64], d: &[f64], frequency: f64, power: f64) -> CoefficientField {
    let (c, d) = (c.to_vec(), d.to_vec());
    let bound = c
        .iter()
        .zip(&d)
        .map(|(a, b)| a.abs() + b.abs())
        .fold(0.0, f64::max);
    let n = c.len();
    FnRule::new(
        "oscillating c + d·cos(f·|α|^p)",
        n,
        bound,
        move |cell: &Cell| {
            let r = cell.norm().powf(power);
            let s = (frequency * r).cos();
            diag(c.iter().zip(&d).map(|(c, d)| c + d * s))
        },
    )
    .into_field()
}

/// Radial profiles for the three-particle model.
///
/// ```toml
/// anchor = [1, [0]]
/// [w1]
/// profile = [-0.75]
/// [w2]
/// profile = [-0.75]
/// [w12]
/// exponential = { amplitude = 0.1, rate = 1.0 }
/// ```
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThreeParticleSpec {
    #[serde(default)]
    pub w1: RadialProfile,
    #[serde(default)]
    pub w2: RadialProfile,
    #[serde(default)]
    pub w12: RadialProfile,
    pub anchor: Option<(usize, Vec<i64>)>,
}

impl ThreeParticleSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, PotentialError> {
        let spec: ThreeParticleSpec =
            toml::from_str(text).map_err(|e| PotentialError::Parse(e.message().to_string()))?;
        for w in [&spec.w1, &spec.w2, &spec.w12] {
            w.validate()?;
        }
        Ok(spec)
    }

    pub fn anchor(&self, g: &PeriodicGraph) -> Result<Vertex, PotentialError> {
        match &self.anchor {
            Some((j, cell)) => vertex(g, *j, cell),
            None => Ok(Vertex::new(0, Cell::zero(g.rank()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cayley, zigzag};

    #[test]
    fn periodic_with_bump() {
        let g = zigzag();
        let spec =
            parse_potential("kind = \"periodic\"\nvalues = [1.0, 3.0]\nentries = [[2, [4], 0.5]]")
                .unwrap();
        let f = spec.field(&g).unwrap();
        assert_eq!(f.at(&Cell(vec![0]))[(1, 1)].re, 3.0);
        assert_eq!(f.at(&Cell(vec![4]))[(1, 1)].re, 3.5);
        assert_eq!(f.limit_along(&Cell(vec![1])).unwrap(), diag([1.0, 3.0]));
    }

    #[test]
    fn table_overrides_default() {
        let g = cayley(1).unwrap();
        let spec =
            parse_potential("kind = \"table\"\ndefault = [0.0]\nentries = [[1, [0], -0.75]]")
                .unwrap();
        let f = spec.field(&g).unwrap();
        assert_eq!(f.at(&Cell(vec![0]))[(0, 0)].re, -0.75);
        assert_eq!(f.at(&Cell(vec![1]))[(0, 0)].re, 0.0);
    }

    #[test]
    fn ray_limits_are_declared() {
        let g = zigzag();
        let spec = parse_potential("kind = \"ray\"\nc = [2.0, 2.0]\nd = [1.0, 1.0]").unwrap();
        let f = spec.field(&g).unwrap();
        assert_eq!(f.limit_along(&Cell(vec![1])).unwrap(), diag([3.0, 3.0]));
        assert_eq!(f.limit_along(&Cell(vec![-1])).unwrap(), diag([1.0, 1.0]));
        assert!((f.at(&Cell(vec![3]))[(0, 0)].re - 2.75).abs() < 1e-15);
        let auto =
            parse_potential("kind = \"ray\"\nc = [2.0, 2.0]\nd = [1.0, 1.0]\nauto = true").unwrap();
        assert!(auto.field(&g).unwrap().declared_directions().is_empty());
    }

    #[test]
    fn radial_profile_follows_graph_distance() {
        let g = zigzag();
        let spec = parse_potential("kind = \"radial\"\nprofile = [1.0, 0.5]").unwrap();
        let f = spec.field(&g).unwrap();
        let at = |j: usize, a: i64| f.at(&Cell(vec![a]))[(j, j)].re;
        assert_eq!(at(0, 0), 1.0);
        assert_eq!(at(1, 0), 0.5);
        assert_eq!(at(1, -1), 0.5);
        assert_eq!(at(0, 1), 0.0);
        assert_eq!(
            spec.field(&g).unwrap().limit_along(&Cell(vec![1])).unwrap(),
            CMatrix::zeros(2, 2)
        );
    }

    #[test]
    fn exponential_support_and_range() {
        let w = RadialProfile {
            profile: None,
            exponential: Some(Exponential {
                amplitude: -2.0,
                rate: 1.0,
            }),
        };
        assert!(w.value(w.support()).abs() >= RADIAL_CUTOFF);
        assert_eq!(w.value(w.support() + 1), 0.0);
        assert_eq!(w.range(), (-2.0, 0.0));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            parse_potential("kind = \"nope\""),
            Err(PotentialError::Parse(_))
        ));
        assert!(matches!(
            parse_potential("kind = \"periodic\"\nvalues = [1.0]\nbogus = 1"),
            Err(PotentialError::Parse(_))
        ));
        let g = zigzag();
        let short = parse_potential("kind = \"periodic\"\nvalues = [1.0]").unwrap();
        assert!(matches!(short.field(&g), Err(PotentialError::Invalid(_))));
        let bad_orbit =
            parse_potential("kind = \"table\"\ndefault = [0.0, 0.0]\nentries = [[3, [0], 1.0]]")
                .unwrap();
        assert!(matches!(
            bad_orbit.field(&g),
            Err(PotentialError::Invalid(_))
        ));
    }

    #[test]
    fn three_particle_file() {
        let s =
            ThreeParticleSpec::from_toml_str("[w1]\nprofile = [-0.75]\n[w2]\nprofile = [-0.75]")
                .unwrap();
        assert_eq!(s.w1.value(0), -0.75);
        assert!(s.w12.is_zero());
        assert!(ThreeParticleSpec::from_toml_str("[w3]\nprofile = [1.0]").is_err());
    }
}
