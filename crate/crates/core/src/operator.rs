//! Band operators in quotient matrix form.
//!
//! A [`BandOperator`] on a periodic graph with `N` orbits is a finite map from
//! cell offsets δ to N×N coefficient fields. Its kernel is
//!
//! ```text
//! k((i, α), (j, α + δ)) = term_δ(α)[i, j]
//! ```
//!
//! so a term keyed by δ couples a row cell α to the column cell α + δ.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{PeriodicGraph, Vertex};
use crate::lattice::Cell;
use crate::linalg::CMatrix;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("GraphMismatch: operators live on different graphs")]
    GraphMismatch,
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error(
        "BandRadiusViolated: kernel is nonzero at {x} -> {y}, beyond the declared radius {radius}"
    )]
    BandRadiusViolated { x: String, y: String, radius: usize },
    #[error("UnboundedCoefficient: sampled modulus {value:e} at cell {cell} exceeds the declared bound {bound:e}")]
    UnboundedCoefficient { cell: Cell, value: f64, bound: f64 },
    #[error("NotDiagonal: potential has an off-diagonal entry at cell {0}")]
    NotDiagonal(Cell),
}

/// A bounded matrix-valued function on Z^n given by a closed-form rule.
pub trait CoefficientRule: Send + Sync + fmt::Debug {
    /// Matrix size N.
    fn size(&self) -> usize;
    fn at(&self, cell: &Cell) -> CMatrix;
    /// Declared bound on the moduli of all entries.
    fn bound(&self) -> f64;
    /// Closed-form limit of `at(m · direction)` as m → ∞, when known.
    fn limit_along(&self, _direction: &Cell) -> Option<CMatrix> {
        None
    }
    /// Directions for which the rule declares its partial limits.
    fn declared_directions(&self) -> Vec<Cell> {
        Vec::new()
    }
    fn describe(&self) -> String;
}

/// Coefficient of one shift term.
#[derive(Clone, Debug)]
pub enum CoefficientField {
    Constant(CMatrix),
    /// Finitely many exceptional cells over a constant background.
    Table {
        default: CMatrix,
        entries: BTreeMap<Cell, CMatrix>,
    },
    Rule(Arc<dyn CoefficientRule>),
}

impl CoefficientField {
    pub fn size(&self) -> usize {
        match self {
            CoefficientField::Constant(m) => m.nrows(),
            CoefficientField::Table { default, .. } => default.nrows(),
            CoefficientField::Rule(r) => r.size(),
        }
    }

    pub fn at(&self, cell: &Cell) -> CMatrix {
        match self {
            CoefficientField::Constant(m) => m.clone(),
            CoefficientField::Table { default, entries } => {
                entries.get(cell).unwrap_or(default).clone()
            }
            CoefficientField::Rule(r) => r.at(cell),
        }
    }

    /// Constant value, if the field does not depend on the cell.
    pub fn as_constant(&self) -> Option<&CMatrix> {
        match self {
            CoefficientField::Constant(m) => Some(m),
            CoefficientField::Table { default, entries } if entries.is_empty() => Some(default),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CoefficientField::Constant(m) => m.iter().all(|z| *z == C64::new(0.0, 0.0)),
            CoefficientField::Table { default, entries } => default
                .iter()
                .chain(entries.values().flat_map(|m| m.iter()))
                .all(|z| *z == C64::new(0.0, 0.0)),
            CoefficientField::Rule(_) => false,
        }
    }

    /// Field β ↦ self(β + by).
    pub fn translated(&self, by: &Cell) -> CoefficientField {
        if by.is_zero() {
            return self.clone();
        }
        match self {
            CoefficientField::Constant(_) => self.clone(),
            CoefficientField::Table { default, entries } => CoefficientField::Table {
                default: default.clone(),
                entries: entries.iter().map(|(k, m)| (k - by, m.clone())).collect(),
            },
            CoefficientField::Rule(r) => CoefficientField::Rule(Arc::new(Translated {
                inner: CoefficientField::Rule(Arc::clone(r)),
                by: by.clone(),
            })),
        }
    }

    pub fn adjoint(&self) -> CoefficientField {
        match self {
            CoefficientField::Constant(m) => CoefficientField::Constant(m.adjoint()),
            CoefficientField::Table { default, entries } => CoefficientField::Table {
                default: default.adjoint(),
                entries: entries
                    .iter()
                    .map(|(k, m)| (k.clone(), m.adjoint()))
                    .collect(),
            },
            CoefficientField::Rule(_) => CoefficientField::Rule(Arc::new(Adjoint(self.clone()))),
        }
    }

    pub fn add(&self, other: &CoefficientField) -> CoefficientField {
        use CoefficientField::*;
        match (self, other) {
            (Constant(a), Constant(b)) => Constant(a + b),
            (Table { default, entries }, Constant(c))
            | (Constant(c), Table { default, entries }) => Table {
                default: default + c,
                entries: entries.iter().map(|(k, m)| (k.clone(), m + c)).collect(),
            },
            (Table { .. }, Table { .. }) => pointwise_table(self, other, |a, b| a + b),
            _ => Rule(Arc::new(Sum(vec![self.clone(), other.clone()]))),
        }
    }

    /// Pointwise matrix product α ↦ self(α) · other(α).
    pub fn mul(&self, other: &CoefficientField) -> CoefficientField {
        use CoefficientField::*;
        match (self, other) {
            (Constant(a), Constant(b)) => Constant(a * b),
            (Table { default, entries }, Constant(c)) => Table {
                default: default * c,
                entries: entries.iter().map(|(k, m)| (k.clone(), m * c)).collect(),
            },
            (Constant(c), Table { default, entries }) => Table {
                default: c * default,
                entries: entries.iter().map(|(k, m)| (k.clone(), c * m)).collect(),
            },
            (Table { .. }, Table { .. }) => pointwise_table(self, other, |a, b| a * b),
            _ => Rule(Arc::new(Product(self.clone(), other.clone()))),
        }
    }

    pub fn scale(&self, factor: C64) -> CoefficientField {
        let n = self.size();
        self.mul(&CoefficientField::Constant(
            CMatrix::identity(n, n) * factor,
        ))
    }

    /// Declared bound on entry moduli.
    pub fn bound(&self) -> f64 {
        let max_entry = |m: &CMatrix| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        match self {
            CoefficientField::Constant(m) => max_entry(m),
            CoefficientField::Table { default, entries } => entries
                .values()
                .map(max_entry)
                .fold(max_entry(default), f64::max),
            CoefficientField::Rule(r) => r.bound(),
        }
    }

    /// Limit along the ray m · direction, if known without sampling.
    pub fn limit_along(&self, direction: &Cell) -> Option<CMatrix> {
        match self {
            CoefficientField::Constant(m) => Some(m.clone()),
            CoefficientField::Table { default, .. } => Some(default.clone()),
            CoefficientField::Rule(r) => r.limit_along(direction),
        }
    }

    pub fn declared_directions(&self) -> Vec<Cell> {
        match self {
            CoefficientField::Rule(r) => r.declared_directions(),
            _ => Vec::new(),
        }
    }

    pub fn is_rule(&self) -> bool {
        matches!(self, CoefficientField::Rule(_))
    }

    pub fn describe(&self) -> String {
        match self {
            CoefficientField::Constant(_) => "constant".into(),
            CoefficientField::Table { entries, .. } => format!("table ({} entries)", entries.len()),
            CoefficientField::Rule(r) => r.describe(),
        }
    }
}

fn pointwise_table(
    a: &CoefficientField,
    b: &CoefficientField,
    op: impl Fn(&CMatrix, &CMatrix) -> CMatrix,
) -> CoefficientField {
    let (
        CoefficientField::Table {
            default: da,
            entries: ea,
        },
        CoefficientField::Table {
            default: db,
            entries: eb,
        },
    ) = (a, b)
    else {
        unreachable!("pointwise_table takes two tables")
    };
    let mut entries = BTreeMap::new();
    for k in ea.keys().chain(eb.keys()) {
        entries
            .entry(k.clone())
            .or_insert_with(|| op(&a.at(k), &b.at(k)));
    }
    CoefficientField::Table {
        default: op(da, db),
        entries,
    }
}

fn merge_directions<'a>(fields: impl IntoIterator<Item = &'a CoefficientField>) -> Vec<Cell> {
    let mut dirs: Vec<Cell> = fields
        .into_iter()
        .flat_map(|f| f.declared_directions())
        .collect();
    dirs.sort();
    dirs.dedup();
    dirs
}

#[derive(Debug)]
struct Translated {
    inner: CoefficientField,
    by: Cell,
}

impl CoefficientRule for Translated {
    fn size(&self) -> usize {
        self.inner.size()
    }
    fn at(&self, cell: &Cell) -> CMatrix {
        self.inner.at(&(cell + &self.by))
    }
    fn bound(&self) -> f64 {
        self.inner.bound()
    }
    // A fixed translation does not move limits along rays of slowly
    // oscillating coefficients.
    fn limit_along(&self, direction: &Cell) -> Option<CMatrix> {
        self.inner.limit_along(direction)
    }
    fn declared_directions(&self) -> Vec<Cell> {
        self.inner.declared_directions()
    }
    fn describe(&self) -> String {
        format!("{} translated by {}", self.inner.describe(), self.by)
    }
}

#[derive(Debug)]
struct Adjoint(CoefficientField);

impl CoefficientRule for Adjoint {
    fn size(&self) -> usize {
        self.0.size()
    }
    fn at(&self, cell: &Cell) -> CMatrix {
        self.0.at(cell).adjoint()
    }
    fn bound(&self) -> f64 {
        self.0.bound()
    }
    fn limit_along(&self, direction: &Cell) -> Option<CMatrix> {
        self.0.limit_along(direction).map(|m| m.adjoint())
    }
    fn declared_directions(&self) -> Vec<Cell> {
        self.0.declared_directions()
    }
    fn describe(&self) -> String {
        format!("adjoint of {}", self.0.describe())
    }
}

#[derive(Debug)]
struct Sum(Vec<CoefficientField>);

impl CoefficientRule for Sum {
    fn size(&self) -> usize {
        self.0[0].size()
    }
    fn at(&self, cell: &Cell) -> CMatrix {
        let mut acc = self.0[0].at(cell);
        for f in &self.0[1..] {
            acc += f.at(cell);
        }
        acc
    }
    fn bound(&self) -> f64 {
        self.0.iter().map(CoefficientField::bound).sum()
    }
    fn limit_along(&self, direction: &Cell) -> Option<CMatrix> {
        let mut acc = self.0[0].limit_along(direction)?;
        for f in &self.0[1..] {
            acc += f.limit_along(direction)?;
        }
        Some(acc)
    }
    fn declared_directions(&self) -> Vec<Cell> {
        merge_directions(&self.0)
    }
    fn describe(&self) -> String {
        self.0
            .iter()
            .map(CoefficientField::describe)
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

#[derive(Debug)]
struct Product(CoefficientField, CoefficientField);

impl CoefficientRule for Product {
    fn size(&self) -> usize {
        self.0.size()
    }
    fn at(&self, cell: &Cell) -> CMatrix {
        self.0.at(cell) * self.1.at(cell)
    }
    fn bound(&self) -> f64 {
        self.0.size() as f64 * self.0.bound() * self.1.bound()
    }
    fn limit_along(&self, direction: &Cell) -> Option<CMatrix> {
        Some(self.0.limit_along(direction)? * self.1.limit_along(direction)?)
    }
    fn declared_directions(&self) -> Vec<Cell> {
        merge_directions([&self.0, &self.1])
    }
    fn describe(&self) -> String {
        format!("({}) * ({})", self.0.describe(), self.1.describe())
    }
}

/// A closure-backed rule for programmatic use.
pub struct FnRule<F> {
    size: usize,
    bound: f64,
    name: String,
    f: F,
    limits: Vec<(Cell, CMatrix)>,
}

impl<F> FnRule<F>
where
    F: Fn(&Cell) -> CMatrix + Send + Sync + 'static,
{
    pub fn new(name: impl Into<String>, size: usize, bound: f64, f: F) -> Self {
        FnRule {
            size,
            bound,
            name: name.into(),
            f,
            limits: Vec::new(),
        }
    }

    /// Declares the partial limit along `direction`.
    pub fn with_limit(mut self, direction: Cell, value: CMatrix) -> Self {
        self.limits.push((direction, value));
        self
    }

    pub fn into_field(self) -> CoefficientField {
        CoefficientField::Rule(Arc::new(self))
    }
}

impl<F> fmt::Debug for FnRule<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnRule").field("name", &self.name).finish()
    }
}

impl<F> CoefficientRule for FnRule<F>
where
    F: Fn(&Cell) -> CMatrix + Send + Sync + 'static,
{
    fn size(&self) -> usize {
        self.size
    }
    fn at(&self, cell: &Cell) -> CMatrix {
        (self.f)(cell)
    }
    fn bound(&self) -> f64 {
        self.bound
    }
    fn limit_along(&self, direction: &Cell) -> Option<CMatrix> {
        self.limits
            .iter()
            .find(|(d, _)| d == direction)
            .map(|(_, m)| m.clone())
    }
    fn declared_directions(&self) -> Vec<Cell> {
        self.limits.iter().map(|(d, _)| d.clone()).collect()
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Finitely supported function on the vertices.
pub type FiniteFunction = BTreeMap<Vertex, C64>;

/// Unit mass at `v`.
pub fn delta(v: &Vertex) -> FiniteFunction {
    BTreeMap::from([(v.clone(), C64::new(1.0, 0.0))])
}

pub fn l2_norm(u: &FiniteFunction) -> f64 {
    u.values().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct BandOperator {
    graph: Arc<PeriodicGraph>,
    terms: BTreeMap<Cell, CoefficientField>,
}

impl BandOperator {
    /// Builds an operator, dropping identically zero terms.
    pub fn from_terms(
        graph: Arc<PeriodicGraph>,
        terms: BTreeMap<Cell, CoefficientField>,
    ) -> Result<Self, OperatorError> {
        for (delta, field) in &terms {
            if delta.rank() != graph.rank() {
                return Err(OperatorError::ShapeMismatch(format!(
                    "offset {delta} has rank {} but the graph has rank {}",
                    delta.rank(),
                    graph.rank()
                )));
            }
            if field.size() != graph.orbits() {
                return Err(OperatorError::ShapeMismatch(format!(
                    "term at {delta} is {0}x{0} but the graph has {1} orbits",
                    field.size(),
                    graph.orbits()
                )));
            }
        }
        let terms = terms.into_iter().filter(|(_, f)| !f.is_zero()).collect();
        Ok(BandOperator { graph, terms })
    }

    pub fn zero(graph: Arc<PeriodicGraph>) -> Self {
        BandOperator {
            graph,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(graph: Arc<PeriodicGraph>) -> Self {
        let n = graph.orbits();
        Self::multiplication(graph, CoefficientField::Constant(CMatrix::identity(n, n)))
    }

    /// Multiplication by a (matrix-valued) coefficient field: a single term at δ = 0.
    pub fn multiplication(graph: Arc<PeriodicGraph>, field: CoefficientField) -> Self {
        let zero = Cell::zero(graph.rank());
        Self::from_terms(graph, BTreeMap::from([(zero, field)]))
            .expect("multiplication field must match the orbit count")
    }

    /// The pure lattice shift (Vu)(j, α) = u(j, α + δ).
    pub fn shift(graph: Arc<PeriodicGraph>, delta: Cell) -> Self {
        let n = graph.orbits();
        Self::from_terms(
            graph,
            BTreeMap::from([(delta, CoefficientField::Constant(CMatrix::identity(n, n)))]),
        )
        .expect("shift has the graph's shape")
    }

    pub fn graph(&self) -> &Arc<PeriodicGraph> {
        &self.graph
    }

    pub fn terms(&self) -> &BTreeMap<Cell, CoefficientField> {
        &self.terms
    }

    pub fn orbits(&self) -> usize {
        self.graph.orbits()
    }

    /// Largest sup-norm of an offset carrying a term.
    pub fn band_width(&self) -> i64 {
        self.terms.keys().map(Cell::linf).max().unwrap_or(0)
    }

    /// True when every term is constant, i.e. the operator commutes with shifts.
    pub fn is_periodic(&self) -> bool {
        self.terms.values().all(|f| f.as_constant().is_some())
    }

    /// k_A(x, y).
    pub fn kernel(&self, x: &Vertex, y: &Vertex) -> C64 {
        let delta = &y.cell - &x.cell;
        match self.terms.get(&delta) {
            Some(field) => field.at(&x.cell)[(x.orbit, y.orbit)],
            None => C64::new(0.0, 0.0),
        }
    }

    /// (Au)(x) = Σ_y k_A(x, y) u(y). Entries that come out exactly zero are dropped.
    pub fn apply(&self, u: &FiniteFunction) -> FiniteFunction {
        let n = self.orbits();
        let mut out: FiniteFunction = BTreeMap::new();
        let mut cache: HashMap<(&Cell, Cell), CMatrix> = HashMap::new();
        for (y, &uy) in u {
            for (delta, field) in &self.terms {
                let row_cell = &y.cell - delta;
                let m = cache
                    .entry((delta, row_cell.clone()))
                    .or_insert_with(|| field.at(&row_cell));
                for i in 0..n {
                    let k = m[(i, y.orbit)];
                    if k != C64::new(0.0, 0.0) {
                        *out.entry(Vertex::new(i, row_cell.clone())).or_default() += k * uy;
                    }
                }
            }
        }
        out.retain(|_, z| *z != C64::new(0.0, 0.0));
        out
    }

    /// Wiener norm Σ_δ h(δ), h(δ) = sup_α max_j Σ_i |term_δ(α)[i, j]|.
    ///
    /// Rule coefficients are sampled on the cube of cells with sup-norm at
    /// most `sample_radius`; a sample above the rule's declared bound is an error.
    pub fn wiener_norm(&self, sample_radius: i64) -> Result<f64, OperatorError> {
        let column_sum = |m: &CMatrix| {
            (0..m.ncols())
                .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let mut total = 0.0;
        for field in self.terms.values() {
            let h = match field {
                CoefficientField::Constant(m) => column_sum(m),
                CoefficientField::Table { default, entries } => entries
                    .values()
                    .map(column_sum)
                    .fold(column_sum(default), f64::max),
                CoefficientField::Rule(r) => {
                    let bound = r.bound();
                    let mut h = 0.0f64;
                    for cell in Cell::cube(self.graph.rank(), sample_radius) {
                        let m = r.at(&cell);
                        let worst = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
                        if worst > bound * (1.0 + 1e-12) {
                            return Err(OperatorError::UnboundedCoefficient {
                                cell,
                                value: worst,
                                bound,
                            });
                        }
                        h = h.max(column_sum(&m));
                    }
                    h
                }
            };
            total += h;
        }
        Ok(total)
    }

    /// T_α^{-1} A T_α: every coefficient field is translated by −α.
    pub fn shift_conjugate(&self, alpha: &Cell) -> BandOperator {
        let back = -alpha;
        BandOperator {
            graph: Arc::clone(&self.graph),
            terms: self
                .terms
                .iter()
                .map(|(d, f)| (d.clone(), f.translated(&back)))
                .collect(),
        }
    }

    fn check_graph(&self, other: &BandOperator) -> Result<(), OperatorError> {
        if Arc::ptr_eq(&self.graph, &other.graph) || self.graph == other.graph {
            Ok(())
        } else {
            Err(OperatorError::GraphMismatch)
        }
    }

    pub fn add(&self, other: &BandOperator) -> Result<BandOperator, OperatorError> {
        self.check_graph(other)?;
        let mut terms = self.terms.clone();
        for (d, f) in &other.terms {
            let merged = match terms.get(d) {
                Some(existing) => existing.add(f),
                None => f.clone(),
            };
            terms.insert(d.clone(), merged);
        }
        BandOperator::from_terms(Arc::clone(&self.graph), terms)
    }

    pub fn scale(&self, factor: C64) -> BandOperator {
        let terms = self
            .terms
            .iter()
            .map(|(d, f)| (d.clone(), f.scale(factor)))
            .collect();
        BandOperator::from_terms(Arc::clone(&self.graph), terms).expect("same shape")
    }

    /// A − λI.
    pub fn minus_identity(&self, lambda: C64) -> BandOperator {
        self.add(&BandOperator::identity(Arc::clone(&self.graph)).scale(-lambda))
            .expect("same graph")
    }

    /// A ∘ B; offsets add, (AB)_δ(α) = Σ_{δ1+δ2=δ} A_δ1(α) B_δ2(α + δ1).
    pub fn compose(&self, other: &BandOperator) -> Result<BandOperator, OperatorError> {
        self.check_graph(other)?;
        let mut terms: BTreeMap<Cell, CoefficientField> = BTreeMap::new();
        for (d1, a) in &self.terms {
            for (d2, b) in &other.terms {
                let product = a.mul(&b.translated(d1));
                let d = d1 + d2;
                let merged = match terms.get(&d) {
                    Some(existing) => existing.add(&product),
                    None => product,
                };
                terms.insert(d, merged);
            }
        }
        BandOperator::from_terms(Arc::clone(&self.graph), terms)
    }

    /// A*, with (A*)_δ(α) = A_{−δ}(α + δ)^H.
    pub fn adjoint(&self) -> BandOperator {
        let terms = self
            .terms
            .iter()
            .map(|(d, f)| {
                let nd = -d;
                (nd.clone(), f.translated(&nd).adjoint())
            })
            .collect();
        BandOperator {
            graph: Arc::clone(&self.graph),
            terms,
        }
    }

    /// Largest kernel discrepancy between two operators over row cells with
    /// sup-norm at most `radius`.
    pub fn max_kernel_difference(&self, other: &BandOperator, radius: i64) -> f64 {
        let mut offsets: Vec<&Cell> = self.terms.keys().chain(other.terms.keys()).collect();
        offsets.sort();
        offsets.dedup();
        let n = self.orbits();
        let zero = CMatrix::zeros(n, n);
        let mut worst = 0.0f64;
        for cell in Cell::cube(self.graph.rank(), radius) {
            for d in &offsets {
                let a = self
                    .terms
                    .get(*d)
                    .map_or_else(|| zero.clone(), |f| f.at(&cell));
                let b = other
                    .terms
                    .get(*d)
                    .map_or_else(|| zero.clone(), |f| f.at(&cell));
                worst = worst.max((a - b).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// Self-adjointness: exact on constant terms, sampled on `radius` otherwise.
    pub fn is_self_adjoint(&self, radius: i64, tol: f64) -> bool {
        self.max_kernel_difference(&self.adjoint(), radius) <= tol
    }
}

/// A kernel (x, y) ↦ k(x, y) that vanishes beyond a declared hop radius.
pub trait Kernel: Send + Sync {
    fn value(&self, x: &Vertex, y: &Vertex) -> C64;
    fn radius(&self) -> usize;
    /// Declared invariance under simultaneous translation of x and y.
    fn periodic(&self) -> bool {
        false
    }
    /// Declared bound on |k|.
    fn bound(&self) -> f64;
}

/// Closure-backed kernel.
pub struct FnKernel<F> {
    pub radius: usize,
    pub periodic: bool,
    pub bound: f64,
    pub f: F,
}

impl<F> Kernel for FnKernel<F>
where
    F: Fn(&Vertex, &Vertex) -> C64 + Send + Sync,
{
    fn value(&self, x: &Vertex, y: &Vertex) -> C64 {
        (self.f)(x, y)
    }
    fn radius(&self) -> usize {
        self.radius
    }
    fn periodic(&self) -> bool {
        self.periodic
    }
    fn bound(&self) -> f64 {
        self.bound
    }
}

struct KernelTerm {
    kernel: Arc<dyn Kernel>,
    offset: Cell,
    size: usize,
}

impl fmt::Debug for KernelTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelTerm")
            .field("offset", &self.offset)
            .finish()
    }
}

impl CoefficientRule for KernelTerm {
    fn size(&self) -> usize {
        self.size
    }
    fn at(&self, cell: &Cell) -> CMatrix {
        let col = cell + &self.offset;
        CMatrix::from_fn(self.size, self.size, |i, j| {
            self.kernel
                .value(&Vertex::new(i, cell.clone()), &Vertex::new(j, col.clone()))
        })
    }
    fn bound(&self) -> f64 {
        self.kernel.bound()
    }
    fn describe(&self) -> String {
        format!("kernel slice at offset {}", self.offset)
    }
}

/// Reorganizes a kernel into shift terms.
///
/// Offsets are those reachable within the declared radius. The kernel is
/// spot-checked for nonzero values just outside the radius around row cells
/// with sup-norm at most `sample_radius`.
pub fn quotient_transform(
    graph: &Arc<PeriodicGraph>,
    kernel: Arc<dyn Kernel>,
    sample_radius: i64,
) -> Result<BandOperator, OperatorError> {
    let n = graph.orbits();
    let radius = kernel.radius();

    let mut offsets: Vec<Cell> = (0..n)
        .flat_map(|i| {
            graph
                .ball(&Vertex::new(i, Cell::zero(graph.rank())), radius)
                .into_keys()
                .map(|v| v.cell)
        })
        .collect();
    offsets.sort();
    offsets.dedup();

    for cell in Cell::cube(graph.rank(), sample_radius) {
        for i in 0..n {
            let x = Vertex::new(i, cell.clone());
            let near = graph.ball(&x, radius);
            for (y, d) in graph.ball(&x, radius + 2) {
                if d > radius
                    && !near.contains_key(&y)
                    && kernel.value(&x, &y) != C64::new(0.0, 0.0)
                {
                    return Err(OperatorError::BandRadiusViolated {
                        x: x.to_string(),
                        y: y.to_string(),
                        radius,
                    });
                }
            }
        }
    }

    let mut terms = BTreeMap::new();
    for delta in offsets {
        let field = if kernel.periodic() {
            let zero = Cell::zero(graph.rank());
            CoefficientField::Constant(CMatrix::from_fn(n, n, |i, j| {
                kernel.value(
                    &Vertex::new(i, zero.clone()),
                    &Vertex::new(j, delta.clone()),
                )
            }))
        } else {
            CoefficientField::Rule(Arc::new(KernelTerm {
                kernel: Arc::clone(&kernel),
                offset: delta.clone(),
                size: n,
            }))
        };
        terms.insert(delta, field);
    }
    BandOperator::from_terms(Arc::clone(graph), terms)
}

/// Checks that a potential field is diagonal, sampling rules on a small window.
pub fn check_diagonal(field: &CoefficientField, rank: usize) -> Result<(), OperatorError> {
    let off_diagonal = |m: &CMatrix| {
        (0..m.nrows()).any(|i| (0..m.ncols()).any(|j| i != j && m[(i, j)] != C64::new(0.0, 0.0)))
    };
    match field {
        CoefficientField::Constant(m) => {
            if off_diagonal(m) {
                return Err(OperatorError::NotDiagonal(Cell::zero(rank)));
            }
        }
        CoefficientField::Table { default, entries } => {
            if off_diagonal(default) {
                return Err(OperatorError::NotDiagonal(Cell::zero(rank)));
            }
            if let Some((k, _)) = entries.iter().find(|(_, m)| off_diagonal(m)) {
                return Err(OperatorError::NotDiagonal(k.clone()));
            }
        }
        CoefficientField::Rule(r) => {
            if let Some(cell) = Cell::cube(rank, 3)
                .into_iter()
                .find(|c| off_diagonal(&r.at(c)))
            {
                return Err(OperatorError::NotDiagonal(cell));
            }
        }
    }
    Ok(())
}

/// Schrödinger operator Δ_Γ + vI.
pub fn schrodinger(
    graph: &Arc<PeriodicGraph>,
    potential: &CoefficientField,
) -> Result<BandOperator, OperatorError> {
    check_diagonal(potential, graph.rank())?;
    if potential.size() != graph.orbits() {
        return Err(OperatorError::ShapeMismatch(format!(
            "potential is {0}x{0} but the graph has {1} orbits",
            potential.size(),
            graph.orbits()
        )));
    }
    crate::graph::laplacian(graph).add(&BandOperator::multiplication(
        Arc::clone(graph),
        potential.clone(),
    ))
}

/// Diagonal constant field diag(values).
pub fn diagonal(values: &[f64]) -> CoefficientField {
    let n = values.len();
    CoefficientField::Constant(CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}
