//! Dense truncations of band operators to finite windows.

use std::collections::HashMap;
use std::io::{self, Write};

use nalgebra::{Schur, SymmetricEigen};
use thiserror::Error;

use crate::graph::Vertex;
use crate::lattice::Cell;
use crate::linalg::{hermitian_defect, CMatrix};
use crate::operator::{delta, BandOperator};
use crate::report::fmt_num;
use crate::C64;

/// Default cap on the number of window rows.
pub const DEFAULT_ROW_CAP: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiniteSectionError {
    #[error("WindowTooLarge: window has {rows} rows, above the cap of {cap}")]
    WindowTooLarge { rows: usize, cap: usize },
    #[error("NoConvergence: dense eigensolver did not converge on a {0}x{0} window")]
    NoConvergence(usize),
}

/// The kernel of an operator restricted to a finite vertex set.
#[derive(Clone, Debug)]
pub struct WindowMatrix {
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    matrix: CMatrix,
}

impl WindowMatrix {
    /// Restriction of `a` to `vertices`, in the given order.
    pub fn from_vertices(
        a: &BandOperator,
        vertices: Vec<Vertex>,
        cap: usize,
    ) -> Result<Self, FiniteSectionError> {
        let rows = vertices.len();
        if rows > cap {
            return Err(FiniteSectionError::WindowTooLarge { rows, cap });
        }
        let index: HashMap<Vertex, usize> = vertices
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let mut matrix = CMatrix::zeros(rows, rows);
        for (col, y) in vertices.iter().enumerate() {
            for (x, value) in a.apply(&delta(y)) {
                if let Some(&row) = index.get(&x) {
                    matrix[(row, col)] = value;
                }
            }
        }
        Ok(WindowMatrix {
            vertices,
            index,
            matrix,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn row_of(&self, v: &Vertex) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_hermitian(&self) -> bool {
        hermitian_defect(&self.matrix) == 0.0
    }

    /// Writes the matrix in the dense text format:
    ///
    /// ```text
    /// # perispec window-matrix v1
    /// # rows <n>
    /// # vertex <row> <orbit> <cell coordinates…>      (one line per row)
    /// <re> <im> <re> <im> …                             (one line per row)
    /// ```
    pub fn dump(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "# perispec window-matrix v1")?;
        writeln!(out, "# rows {}", self.rows())?;
        for (i, v) in self.vertices.iter().enumerate() {
            let cell: Vec<String> = v.cell.0.iter().map(|c| c.to_string()).collect();
            writeln!(out, "# vertex {} {} {}", i, v.orbit + 1, cell.join(" "))?;
        }
        for r in 0..self.rows() {
            let line: Vec<String> = (0..self.rows())
                .map(|c| {
                    let z = self.matrix[(r, c)];
                    format!("{} {}", fmt_num(z.re), fmt_num(z.im))
                })
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Vertices with cell in the cube |cell|_∞ ≤ R, orbit-major with cells in
/// lexicographic order.
pub fn cube_vertices(rank: usize, orbits: usize, radius: usize) -> Vec<Vertex> {
    let cells = Cell::cube(rank, radius as i64);
    (0..orbits)
        .flat_map(|j| cells.iter().map(move |c| Vertex::new(j, c.clone())))
        .collect()
}

/// Vertices within graph distance R of `center`, sorted by (orbit, cell).
pub fn ball_vertices(a: &BandOperator, center: &Vertex, radius: usize) -> Vec<Vertex> {
    let mut v: Vec<Vertex> = a.graph().ball(center, radius).into_keys().collect();
    v.sort();
    v
}

/// Restriction of `a` to the cells with |cell|_∞ ≤ R.
pub fn truncate(
    a: &BandOperator,
    radius: usize,
    cap: usize,
) -> Result<WindowMatrix, FiniteSectionError> {
    let rank = a.graph().rank();
    let rows = a.orbits() * (2 * radius + 1).pow(rank as u32);
    if rows > cap {
        return Err(FiniteSectionError::WindowTooLarge { rows, cap });
    }
    WindowMatrix::from_vertices(a, cube_vertices(rank, a.orbits(), radius), cap)
}

/// Ascending eigenvalues of a Hermitian window.
pub fn hermitian_spectrum(w: &WindowMatrix) -> Vec<f64> {
    if w.rows() == 0 {
        return Vec::new();
    }
    let m = (w.matrix() + w.matrix().adjoint()) * C64::new(0.5, 0.0);
    let mut values: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// All eigenvalues of the window, sorted by (re, im). Hermitian windows take
/// the symmetric path and come back real.
pub fn window_spectrum(w: &WindowMatrix) -> Result<Vec<C64>, FiniteSectionError> {
    if w.is_hermitian() {
        return Ok(hermitian_spectrum(w)
            .into_iter()
            .map(|x| C64::new(x, 0.0))
            .collect());
    }
    let n = w.rows();
    let schur = Schur::try_new(w.matrix().clone(), 1e-14, 100_000)
        .ok_or(FiniteSectionError::NoConvergence(n))?;
    let mut values: Vec<C64> = schur
        .eigenvalues()
        .ok_or(FiniteSectionError::NoConvergence(n))?
        .iter()
        .copied()
        .collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(values)
}

pub fn finite_section_spectrum(
    a: &BandOperator,
    radius: usize,
    cap: usize,
) -> Result<Vec<C64>, FiniteSectionError> {
    window_spectrum(&truncate(a, radius, cap)?)
}
