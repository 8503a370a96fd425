//! Torus symbols of periodic band operators.
//!
//! For a periodic operator with constant terms `A_δ` the symbol is the
//! matrix-valued trigonometric polynomial
//!
//! ```text
//! σ(t) = Σ_β r(β) t^β,   r(β) = A_{−β},   t = (e^{iφ_1}, …, e^{iφ_n})
//! ```
//!
//! Band enclosures are certified: the torus is covered by cubes around grid
//! points and every cube whose eigenvalue deviation bound could reach past the
//! current band estimate by more than `tol` is subdivided until none remain.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::interval::{Interval, IntervalUnion};
use crate::lattice::Cell;
use crate::linalg::{self, frobenius, CMatrix, LinalgError};
use crate::operator::BandOperator;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("NotPeriodic: operator has a non-constant coefficient at shift {0}")]
    NotPeriodic(Cell),
    #[error("NotHermitian: symbol coefficients violate r(-b) = r(b)^H by {defect:e}")]
    NotHermitian { defect: f64 },
    #[error(
        "RefinementExhausted: {cells} cube(s) still uncertified after {levels} refinement level(s)"
    )]
    RefinementExhausted { levels: usize, cells: usize },
    #[error("Inconclusive: min |det| {min_abs_det:e} near angle {witness:?} could not be separated from 0")]
    Inconclusive { min_abs_det: f64, witness: Vec<f64> },
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

const MAX_LEVELS: usize = 40;
const REFINE_BUDGET: usize = 4_000_000;
const ROUNDOFF: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct Symbol {
    rank: usize,
    size: usize,
    terms: BTreeMap<Cell, CMatrix>,
}

impl Symbol {
    /// Builds a symbol from its Fourier coefficients, dropping zero ones.
    pub fn new(rank: usize, size: usize, terms: BTreeMap<Cell, CMatrix>) -> Self {
        let terms = terms
            .into_iter()
            .filter(|(beta, r)| {
                assert_eq!(beta.rank(), rank, "exponent rank mismatch");
                assert_eq!(r.shape(), (size, size), "coefficient shape mismatch");
                r.iter().any(|z| *z != C64::new(0.0, 0.0))
            })
            .collect();
        Symbol { rank, size, terms }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Coefficients r(β).
    pub fn terms(&self) -> &BTreeMap<Cell, CMatrix> {
        &self.terms
    }

    pub fn eval(&self, phi: &[f64]) -> CMatrix {
        assert_eq!(phi.len(), self.rank, "angle vector has wrong length");
        let mut out = CMatrix::zeros(self.size, self.size);
        for (beta, r) in &self.terms {
            out += r * C64::from_polar(1.0, beta.dot(phi));
        }
        out
    }

    /// max_β of the largest entry of r(−β) − r(β)^H. Zero exactly when σ(t)
    /// is Hermitian at every point of the torus.
    pub fn hermitian_defect(&self) -> f64 {
        let zero = CMatrix::zeros(self.size, self.size);
        let mut worst = 0.0f64;
        for (beta, r) in &self.terms {
            let mirror = self.terms.get(&-beta).unwrap_or(&zero);
            let d = mirror - r.adjoint();
            worst = worst.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// σ − λI.
    pub fn shifted(&self, lambda: C64) -> Symbol {
        let mut terms = self.terms.clone();
        let id = CMatrix::identity(self.size, self.size) * lambda;
        let zero = Cell::zero(self.rank);
        let entry = terms
            .entry(zero)
            .or_insert_with(|| CMatrix::zeros(self.size, self.size));
        *entry -= id;
        Symbol::new(self.rank, self.size, terms)
    }

    /// Σ_β ‖r(β)‖_F, a bound for ‖σ(t)‖ on the torus.
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.values().map(frobenius).sum()
    }

    fn hermitian_tol(&self) -> f64 {
        1e-12 * self.coefficient_sum().max(1.0)
    }
}

pub fn build_symbol(a: &BandOperator) -> Result<Symbol, SymbolError> {
    let rank = a.graph().rank();
    let size = a.orbits();
    let mut terms = BTreeMap::new();
    for (delta, field) in a.terms() {
        let r = field
            .as_constant()
            .ok_or_else(|| SymbolError::NotPeriodic(delta.clone()))?;
        terms.insert(-delta, r.clone());
    }
    Ok(Symbol::new(rank, size, terms))
}

pub fn eval_symbol(s: &Symbol, phi: &[f64]) -> CMatrix {
    s.eval(phi)
}

/// Angles of grid point `index` on the uniform M^n torus grid, in
/// lexicographic order with the last axis fastest.
pub fn grid_angles(rank: usize, m: usize, mut index: usize) -> Vec<f64> {
    let mut phi = vec![0.0; rank];
    for slot in phi.iter_mut().rev() {
        *slot = 2.0 * PI * (index % m) as f64 / m as f64;
        index /= m;
    }
    phi
}

fn grid_coords(rank: usize, m: usize, mut index: usize) -> Vec<usize> {
    let mut c = vec![0; rank];
    for slot in c.iter_mut().rev() {
        *slot = index % m;
        index /= m;
    }
    c
}

/// Evaluation data shared by the grid sweeps.
struct Evaluator<'a> {
    rank: usize,
    size: usize,
    betas: Vec<&'a Cell>,
    mats: Vec<&'a CMatrix>,
    /// Σ ‖r‖ |β|_1: Lipschitz constant of σ for the sup-norm on angles.
    lip: f64,
    /// Σ ‖r‖ |β|_1² / 2: second-derivative bound.
    curv: f64,
    scale: f64,
}

/// Eigenvalues at a cube centre with a bound on how far each sorted
/// eigenvalue can move inside the cube.
struct Sample {
    eigs: Vec<f64>,
    dev: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(s: &'a Symbol) -> Self {
        let mut lip = 0.0;
        let mut curv = 0.0;
        let mut scale = 0.0;
        for (beta, r) in &s.terms {
            let norm = frobenius(r);
            let l1 = beta.l1() as f64;
            lip += norm * l1;
            curv += 0.5 * norm * l1 * l1;
            scale += norm;
        }
        Evaluator {
            rank: s.rank,
            size: s.size,
            betas: s.terms.keys().collect(),
            mats: s.terms.values().collect(),
            lip,
            curv,
            scale,
        }
    }

    fn phases_at(&self, phi: &[f64]) -> Vec<C64> {
        self.betas
            .iter()
            .map(|b| C64::from_polar(1.0, b.dot(phi)))
            .collect()
    }

    fn matrix(&self, phases: &[C64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.size, self.size);
        for (r, p) in self.mats.iter().zip(phases) {
            out += *r * *p;
        }
        out
    }

    fn slack(&self) -> f64 {
        ROUNDOFF * (1.0 + self.scale)
    }

    /// Eigenvalues and per-branch deviation bounds for the cube of half-width
    /// `h` centred where the term phases are `phases`.
    fn sample(&self, phases: &[C64], h: f64) -> Result<Sample, LinalgError> {
        let rho = self.curv * h * h;
        let lipschitz = self.lip * h + self.slack();
        if self.size == 1 {
            let mut f = C64::new(0.0, 0.0);
            let mut grad = vec![C64::new(0.0, 0.0); self.rank];
            for ((beta, r), p) in self.betas.iter().zip(&self.mats).zip(phases) {
                let z = r[(0, 0)] * p;
                f += z;
                for (g, &b) in grad.iter_mut().zip(&beta.0) {
                    *g += z * C64::new(0.0, b as f64);
                }
            }
            let first: f64 = grad.iter().map(|g| g.norm()).sum::<f64>() * h;
            let dev = lipschitz.min(first + rho + self.slack());
            return Ok(Sample {
                eigs: vec![f.re],
                dev: vec![dev],
            });
        }

        let n = self.size;
        let mut m = CMatrix::zeros(n, n);
        let mut grad = vec![CMatrix::zeros(n, n); self.rank];
        for ((beta, r), p) in self.betas.iter().zip(&self.mats).zip(phases) {
            let z = *r * *p;
            for (g, &b) in grad.iter_mut().zip(&beta.0) {
                if b != 0 {
                    *g += &z * C64::new(0.0, b as f64);
                }
            }
            m += z;
        }
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let (eigs, vecs) = linalg::hermitian_eigen(&m)?;

        // With E = σ(c+d) − σ(c), ‖E‖ ≤ ε. When branch j is separated from
        // its neighbours by g > 2ε the Schur complement gives
        // |λ_j(c+d) − λ_j(c) − v_jᴴ E v_j| ≤ ε² / (g − 2ε).
        let eps = grad.iter().map(frobenius).sum::<f64>() * h + rho;
        let dev = (0..n)
            .map(|j| {
                let below = if j > 0 {
                    eigs[j] - eigs[j - 1]
                } else {
                    f64::INFINITY
                };
                let above = if j + 1 < n {
                    eigs[j + 1] - eigs[j]
                } else {
                    f64::INFINITY
                };
                let gap = below.min(above);
                if gap <= 2.0 * eps {
                    return lipschitz;
                }
                let v = vecs.column(j);
                let first: f64 = grad
                    .iter()
                    .map(|g| (v.adjoint() * g * v)[(0, 0)].norm())
                    .sum::<f64>()
                    * h;
                let second = if gap.is_finite() {
                    eps * eps / (gap - 2.0 * eps)
                } else {
                    0.0
                };
                lipschitz.min(first + rho + second + self.slack())
            })
            .collect();
        Ok(Sample { eigs, dev })
    }
}

/// Walks the uniform grid row by row (all axes but the last fixed), handing
/// each point's term phases to `f`. Phases come from a table of M-th roots of
/// unity, so the sweep needs no trigonometric calls.
struct GridSweep<'a> {
    ev: &'a Evaluator<'a>,
    m: usize,
    roots: Vec<C64>,
}

impl<'a> GridSweep<'a> {
    fn new(ev: &'a Evaluator<'a>, m: usize) -> Self {
        let mut roots: Vec<C64> = (0..m)
            .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64))
            .collect();
        // Exact conjugate symmetry keeps Hermitian symbols Hermitian.
        for j in 1..m {
            if j > m - j {
                roots[j] = roots[m - j].conj();
            }
        }
        GridSweep { ev, m, roots }
    }

    fn rows(&self) -> usize {
        self.m.pow(self.ev.rank as u32 - 1)
    }

    fn root(&self, b: i64, i: usize) -> C64 {
        let m = self.m as i64;
        self.roots[(b * i as i64).rem_euclid(m) as usize]
    }

    fn for_row<E>(
        &self,
        row: usize,
        mut f: impl FnMut(usize, &[C64]) -> Result<(), E>,
    ) -> Result<(), E> {
        let rank = self.ev.rank;
        let outer = grid_coords(rank - 1, self.m, row);
        let partial: Vec<C64> = self
            .ev
            .betas
            .iter()
            .map(|b| {
                outer
                    .iter()
                    .enumerate()
                    .fold(C64::new(1.0, 0.0), |acc, (k, &i)| {
                        acc * self.root(b.0[k], i)
                    })
            })
            .collect();
        let mut phases = partial.clone();
        for i in 0..self.m {
            for ((p, q), b) in phases.iter_mut().zip(&partial).zip(&self.ev.betas) {
                *p = q * self.root(b.0[rank - 1], i);
            }
            f(row * self.m + i, &phases)?;
        }
        Ok(())
    }
}

fn check_grid(rank: usize, m: usize) -> Result<(), SymbolError> {
    if m < 2 {
        return Err(SymbolError::InvalidGrid(format!(
            "grid resolution {m} is below 2"
        )));
    }
    if rank == 0 {
        return Err(SymbolError::InvalidGrid("lattice rank 0".into()));
    }
    let points = (m as f64).powi(rank as i32);
    if points > 2e8 {
        return Err(SymbolError::InvalidGrid(format!(
            "{m}^{rank} grid points is too many"
        )));
    }
    Ok(())
}

/// Centres of the 3^n sub-cubes of the cube of half-width `h` around `c`.
fn children(c: &[f64], h: f64) -> impl Iterator<Item = Vec<f64>> + '_ {
    let step = 2.0 * h / 3.0;
    Cell::cube(c.len(), 1).into_iter().map(move |o| {
        c.iter()
            .zip(&o.0)
            .map(|(x, &k)| x + step * k as f64)
            .collect()
    })
}

/// Per-branch ranges [min λ_j, max λ_j] of a Hermitian symbol, each endpoint
/// attained on the torus and within `tol` of the true extremum.
pub fn branch_ranges(s: &Symbol, grid: usize, tol: f64) -> Result<Vec<(f64, f64)>, SymbolError> {
    check_grid(s.rank, grid)?;
    let defect = s.hermitian_defect();
    if defect > s.hermitian_tol() {
        return Err(SymbolError::NotHermitian { defect });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(SymbolError::InvalidGrid(format!(
            "tolerance {tol} must be positive"
        )));
    }
    if s.size == 1
        && s.rank > 1
        && s.terms
            .keys()
            .all(|b| b.0.iter().filter(|&&c| c != 0).count() <= 1)
    {
        return separable_range(s, grid, tol).map(|r| vec![r]);
    }

    let ev = Evaluator::new(s);
    let sweep = GridSweep::new(&ev, grid);
    let n = s.size;
    let h0 = PI / grid as f64;

    let row_ranges: Vec<Vec<(f64, f64)>> = (0..sweep.rows())
        .into_par_iter()
        .map(|row| {
            let mut r = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
            sweep.for_row(row, |_, phases| {
                let smp = ev.sample(phases, h0)?;
                for (slot, &e) in r.iter_mut().zip(&smp.eigs) {
                    slot.0 = slot.0.min(e);
                    slot.1 = slot.1.max(e);
                }
                Ok::<_, LinalgError>(())
            })?;
            Ok(r)
        })
        .collect::<Result<_, LinalgError>>()?;
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    for r in &row_ranges {
        for (acc, x) in ranges.iter_mut().zip(r) {
            acc.0 = acc.0.min(x.0);
            acc.1 = acc.1.max(x.1);
        }
    }

    let violates = |smp: &Sample, ranges: &[(f64, f64)]| {
        smp.eigs
            .iter()
            .zip(&smp.dev)
            .zip(ranges)
            .any(|((&e, &d), &(lo, hi))| e - d < lo - tol || e + d > hi + tol)
    };

    let mut pending: Vec<Vec<f64>> = (0..sweep.rows())
        .into_par_iter()
        .map(|row| {
            let mut bad = Vec::new();
            sweep.for_row(row, |idx, phases| {
                if violates(&ev.sample(phases, h0)?, &ranges) {
                    bad.push(grid_angles(s.rank, grid, idx));
                }
                Ok::<_, LinalgError>(())
            })?;
            Ok(bad)
        })
        .collect::<Result<Vec<_>, LinalgError>>()?
        .concat();

    let fan_out = 3usize.pow(s.rank as u32);
    let mut h = h0;
    let mut levels = 0;
    let mut spent = 0usize;
    while !pending.is_empty() {
        if levels == MAX_LEVELS || spent + pending.len() * fan_out > REFINE_BUDGET {
            return Err(SymbolError::RefinementExhausted {
                levels,
                cells: pending.len(),
            });
        }
        levels += 1;
        spent += pending.len() * fan_out;
        let child_h = h / 3.0;
        let samples: Vec<(Vec<f64>, Sample)> = pending
            .par_iter()
            .flat_map_iter(|c| children(c, h).collect::<Vec<_>>())
            .map(|c| {
                let smp = ev.sample(&ev.phases_at(&c), child_h)?;
                Ok((c, smp))
            })
            .collect::<Result<_, LinalgError>>()?;
        for (_, smp) in &samples {
            for (acc, &e) in ranges.iter_mut().zip(&smp.eigs) {
                acc.0 = acc.0.min(e);
                acc.1 = acc.1.max(e);
            }
        }
        pending = samples
            .into_iter()
            .filter(|(_, smp)| violates(smp, &ranges))
            .map(|(c, _)| c)
            .collect();
        h = child_h;
    }
    Ok(ranges)
}

/// A scalar symbol whose exponents each touch one axis is a sum of
/// one-variable functions, so its range is the sum of their ranges.
fn separable_range(s: &Symbol, grid: usize, tol: f64) -> Result<(f64, f64), SymbolError> {
    let share = tol / s.rank as f64;
    let mut lo = 0.0;
    let mut hi = 0.0;
    for axis in 0..s.rank {
        let terms: BTreeMap<Cell, CMatrix> = s
            .terms
            .iter()
            .filter(|(b, _)| b.0[axis] != 0)
            .map(|(b, r)| (Cell(vec![b.0[axis]]), r.clone()))
            .collect();
        let (a, b) = branch_ranges(&Symbol::new(1, 1, terms), grid, share)?[0];
        lo += a;
        hi += b;
    }
    let c = s
        .terms
        .get(&Cell::zero(s.rank))
        .map_or(0.0, |r| r[(0, 0)].re);
    Ok((lo + c, hi + c))
}

/// The spectrum of a periodic self-adjoint operator as a union of at most N
/// bands. Each band is enclosed to within `tol` in both directions; bands
/// separated by at most `2·tol` are merged since such a gap is not resolved.
pub fn selfadjoint_bands(s: &Symbol, grid: usize, tol: f64) -> Result<IntervalUnion, SymbolError> {
    let ranges = branch_ranges(s, grid, tol)?;
    Ok(IntervalUnion::merged_within(
        ranges.into_iter().map(|(a, b)| Interval::new(a, b)),
        2.0 * tol,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Invertibility {
    pub invertible: bool,
    /// Smallest |det σ| over every sampled point.
    pub min_abs_det: f64,
    /// Angles of the sample attaining `min_abs_det`.
    pub witness: Vec<f64>,
}

/// Decides whether det σ(t) ≠ 0 on the whole torus.
///
/// Non-invertibility is certified by a sample with |det| at roundoff level or,
/// for Hermitian symbols, by an eigenvalue branch taking both signs.
/// Invertibility is certified once every cube provably excludes 0.
pub fn is_invertible_symbol(
    s: &Symbol,
    grid: usize,
    tol: f64,
) -> Result<Invertibility, SymbolError> {
    check_grid(s.rank, grid)?;
    let ev = Evaluator::new(s);
    let sweep = GridSweep::new(&ev, grid);
    let n = s.size;
    let hermitian = s.hermitian_defect() <= s.hermitian_tol();
    let det_zero = 1e-12 * ev.scale.max(1.0).powi(n as i32);
    let eig_zero = 1e-12 * ev.scale.max(1.0);
    // |det A − det B| ≤ N·max(‖A‖,‖B‖)^(N−1)·‖A − B‖.
    let det_lip = n as f64 * ev.scale.powi(n as i32 - 1) * ev.lip;

    struct Probe {
        det: f64,
        signs: Vec<(bool, bool)>,
        zero: bool,
        certified: bool,
        stuck: bool,
    }
    let probe = |phases: &[C64], h: f64| -> Result<Probe, LinalgError> {
        if hermitian {
            let smp = ev.sample(phases, h)?;
            let det = smp.eigs.iter().product::<f64>().abs();
            let signs = smp
                .eigs
                .iter()
                .map(|&e| (e > eig_zero, e < -eig_zero))
                .collect();
            let zero = smp.eigs.iter().any(|e| e.abs() <= eig_zero);
            let certified = smp.eigs.iter().zip(&smp.dev).all(|(e, d)| e.abs() > *d);
            let stuck = smp.dev.iter().all(|&d| d < 0.5 * tol);
            Ok(Probe {
                det,
                signs,
                zero,
                certified,
                stuck,
            })
        } else {
            let det = linalg::determinant(&ev.matrix(phases)).norm();
            let bound = det_lip * h + ev.slack();
            Ok(Probe {
                det,
                signs: Vec::new(),
                zero: det <= det_zero,
                certified: det > bound,
                stuck: bound < tol,
            })
        }
    };

    struct Tally {
        min: f64,
        witness: Vec<f64>,
        signs: Vec<(bool, bool)>,
        zero: bool,
        stuck: bool,
    }
    impl Tally {
        fn absorb(&mut self, p: &Probe, at: impl FnOnce() -> Vec<f64>) {
            if p.det < self.min {
                self.min = p.det;
                self.witness = at();
            }
            for (acc, s) in self.signs.iter_mut().zip(&p.signs) {
                acc.0 |= s.0;
                acc.1 |= s.1;
            }
            self.zero |= p.zero;
        }
        fn merge(&mut self, other: Tally) {
            if other.min < self.min {
                self.min = other.min;
                self.witness = other.witness;
            }
            for (acc, s) in self.signs.iter_mut().zip(&other.signs) {
                acc.0 |= s.0;
                acc.1 |= s.1;
            }
            self.zero |= other.zero;
            self.stuck |= other.stuck;
        }
        fn crosses_zero(&self) -> bool {
            self.zero || self.signs.iter().any(|&(p, q)| p && q)
        }
    }
    let fresh = || Tally {
        min: f64::INFINITY,
        witness: Vec::new(),
        signs: vec![(false, false); if hermitian { n } else { 0 }],
        zero: false,
        stuck: false,
    };

    let h0 = PI / grid as f64;
    let rows: Vec<(Tally, Vec<Vec<f64>>)> = (0..sweep.rows())
        .into_par_iter()
        .map(|row| {
            let mut t = fresh();
            let mut bad = Vec::new();
            sweep.for_row(row, |idx, phases| {
                let p = probe(phases, h0)?;
                t.absorb(&p, || grid_angles(s.rank, grid, idx));
                if !p.certified {
                    t.stuck |= p.stuck;
                    bad.push(grid_angles(s.rank, grid, idx));
                }
                Ok::<_, LinalgError>(())
            })?;
            Ok((t, bad))
        })
        .collect::<Result<_, LinalgError>>()?;
    let mut tally = fresh();
    let mut pending = Vec::new();
    for (t, bad) in rows {
        tally.merge(t);
        pending.extend(bad);
    }

    let fan_out = 3usize.pow(s.rank as u32);
    let mut h = h0;
    let mut levels = 0;
    let mut spent = 0usize;
    loop {
        if tally.crosses_zero() {
            return Ok(Invertibility {
                invertible: false,
                min_abs_det: tally.min,
                witness: tally.witness,
            });
        }
        if pending.is_empty() {
            return Ok(Invertibility {
                invertible: true,
                min_abs_det: tally.min,
                witness: tally.witness,
            });
        }
        if tally.stuck || levels == MAX_LEVELS || spent + pending.len() * fan_out > REFINE_BUDGET {
            return Err(SymbolError::Inconclusive {
                min_abs_det: tally.min,
                witness: tally.witness,
            });
        }
        levels += 1;
        spent += pending.len() * fan_out;
        let child_h = h / 3.0;
        let probes: Vec<(Vec<f64>, Probe)> = pending
            .par_iter()
            .flat_map_iter(|c| children(c, h).collect::<Vec<_>>())
            .map(|c| {
                let p = probe(&ev.phases_at(&c), child_h)?;
                Ok((c, p))
            })
            .collect::<Result<_, LinalgError>>()?;
        pending = Vec::new();
        for (c, p) in probes {
            tally.absorb(&p, || c.clone());
            if !p.certified {
                tally.stuck |= p.stuck;
                pending.push(c);
            }
        }
        h = child_h;
    }
}

/// Eigenvalue branches sampled on the uniform M^n torus grid.
#[derive(Clone, Debug)]
pub struct DispersionCurves {
    rank: usize,
    grid: usize,
    size: usize,
    hermitian: bool,
    values: Vec<Vec<C64>>,
}

impl DispersionCurves {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Number of branches N.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn angles(&self, index: usize) -> Vec<f64> {
        grid_angles(self.rank, self.grid, index)
    }

    /// Branch values at grid point `index`, in branch order.
    pub fn values(&self, index: usize) -> &[C64] {
        &self.values[index]
    }

    pub fn points(&self) -> impl Iterator<Item = (Vec<f64>, &[C64])> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.angles(i), v.as_slice()))
    }
}

/// Samples every eigenvalue of σ on the M^n grid.
///
/// With `hermitian_hint` the branches are the ascending eigenvalues at each
/// point. Otherwise each point is matched to its predecessor along the last
/// axis that moved (minimal total displacement over all pairings for N ≤ 7,
/// greedy nearest beyond that), which yields continuous branches wherever the
/// grid resolves them.
pub fn dispersion_curves(
    s: &Symbol,
    grid: usize,
    hermitian_hint: bool,
) -> Result<DispersionCurves, SymbolError> {
    check_grid(s.rank, grid)?;
    let ev = Evaluator::new(s);
    let sweep = GridSweep::new(&ev, grid);
    let mut values: Vec<Vec<C64>> = (0..sweep.rows())
        .into_par_iter()
        .map(|row| {
            let mut out = Vec::with_capacity(grid);
            sweep.for_row(row, |_, phases| {
                let mut m = ev.matrix(phases);
                if hermitian_hint {
                    m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
                }
                out.push(linalg::eigenvalues(&m, hermitian_hint)?);
                Ok::<_, LinalgError>(())
            })?;
            Ok(out)
        })
        .collect::<Result<Vec<_>, LinalgError>>()?
        .concat();

    if !hermitian_hint {
        for idx in 1..values.len() {
            let coords = grid_coords(s.rank, grid, idx);
            let axis = coords.iter().rposition(|&c| c != 0).expect("idx > 0");
            let parent = idx - grid.pow((s.rank - 1 - axis) as u32);
            let matched = match_branches(&values[parent], &values[idx]);
            values[idx] = matched;
        }
    }
    Ok(DispersionCurves {
        rank: s.rank,
        grid,
        size: s.size,
        hermitian: hermitian_hint,
        values,
    })
}

/// Reorders `next` so that `next[j]` continues `prev[j]`.
fn match_branches(prev: &[C64], next: &[C64]) -> Vec<C64> {
    let n = prev.len();
    if n <= 7 {
        let best = (0..n)
            .permutations(n)
            .min_by(|p, q| {
                let cost = |perm: &Vec<usize>| -> f64 {
                    perm.iter()
                        .enumerate()
                        .map(|(j, &k)| (next[k] - prev[j]).norm())
                        .sum()
                };
                cost(p).total_cmp(&cost(q))
            })
            .unwrap_or_default();
        return best.into_iter().map(|k| next[k]).collect();
    }
    let mut used = vec![false; n];
    prev.iter()
        .map(|p| {
            let k = (0..n)
                .filter(|&k| !used[k])
                .min_by(|&a, &b| (next[a] - p).norm().total_cmp(&(next[b] - p).norm()))
                .expect("a free branch remains");
            used[k] = true;
            next[k]
        })
        .collect()
}
