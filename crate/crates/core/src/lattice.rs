//! Points of the translation lattice Z^n and integer lattice utilities.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point of Z^n, used both as a cell label and as a shift offset.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cell(pub Vec<i64>);

impl Cell {
    pub fn zero(rank: usize) -> Self {
        Cell(vec![0; rank])
    }

    /// The unit vector e_axis.
    pub fn unit(rank: usize, axis: usize) -> Self {
        let mut v = vec![0; rank];
        v[axis] = 1;
        Cell(v)
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: i64) -> Self {
        Cell(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn dot(&self, phi: &[f64]) -> f64 {
        self.0.iter().zip(phi).map(|(&c, &p)| c as f64 * p).sum()
    }

    /// Euclidean norm as a float.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&c| (c as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// All cells with sup-norm at most `radius`, in lexicographic order.
    pub fn cube(rank: usize, radius: i64) -> Vec<Cell> {
        let side = (2 * radius + 1) as usize;
        let total = side.pow(rank as u32);
        (0..total)
            .map(|mut flat| {
                let mut coords = vec![0; rank];
                for slot in coords.iter_mut().rev() {
                    *slot = (flat % side) as i64 - radius;
                    flat /= side;
                }
                Cell(coords)
            })
            .collect()
    }
}

impl From<Vec<i64>> for Cell {
    fn from(v: Vec<i64>) -> Self {
        Cell(v)
    }
}

impl Add for &Cell {
    type Output = Cell;
    fn add(self, rhs: &Cell) -> Cell {
        debug_assert_eq!(self.rank(), rhs.rank());
        Cell(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Cell {
    type Output = Cell;
    fn sub(self, rhs: &Cell) -> Cell {
        debug_assert_eq!(self.rank(), rhs.rank());
        Cell(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Cell {
    type Output = Cell;
    fn neg(self) -> Cell {
        Cell(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Nonzero invariant factors of the Smith normal form of the integer matrix
/// whose rows are `rows` (each of length `cols`).
pub fn smith_invariants(rows: &[Vec<i64>], cols: usize) -> Vec<i128> {
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let m = a.len();
    let mut factors = Vec::new();

    for t in 0..m.min(cols) {
        loop {
            // Smallest nonzero entry of the trailing block becomes the pivot.
            let mut pivot: Option<(usize, usize)> = None;
            for (i, row) in a.iter().enumerate().skip(t) {
                for (j, &x) in row.iter().enumerate().skip(t) {
                    if x != 0 && pivot.is_none_or(|(pi, pj)| x.abs() < a[pi][pj].abs()) {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                return factors;
            };
            a.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }

            let p = a[t][t];
            let mut dirty = false;
            for i in t + 1..m {
                let q = a[i][t] / p;
                if q != 0 {
                    let pivot = a[t].clone();
                    for (x, y) in a[i][t..].iter_mut().zip(&pivot[t..]) {
                        *x -= q * y;
                    }
                }
                dirty |= a[i][t] != 0;
            }
            for j in t + 1..cols {
                let q = a[t][j] / p;
                if q != 0 {
                    for row in a.iter_mut().skip(t) {
                        row[j] -= q * row[t];
                    }
                }
                dirty |= a[t][j] != 0;
            }
            if dirty {
                continue;
            }

            // Pivot must divide the remaining block; otherwise fold a row in.
            let offender = (t + 1..m).find(|&i| (t + 1..cols).any(|j| a[i][j] % p != 0));
            match offender {
                Some(i) => {
                    let other = a[i].clone();
                    for (x, y) in a[t][t..].iter_mut().zip(&other[t..]) {
                        *x += y;
                    }
                }
                None => {
                    factors.push(p.abs());
                    break;
                }
            }
        }
    }
    factors
}

/// True iff the given vectors generate all of Z^rank.
pub fn generates_full_lattice(vectors: &[Vec<i64>], rank: usize) -> bool {
    let inv = smith_invariants(vectors, rank);
    inv.len() == rank && inv.iter().all(|&d| d == 1)
}
