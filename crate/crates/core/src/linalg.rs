//! Small dense complex linear algebra: Hermitian Jacobi eigensolver,
//! characteristic polynomials, polynomial roots and determinants.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::C64;

pub type CMatrix = DMatrix<C64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("NoConvergence: {0}")]
    NoConvergence(String),
}

const JACOBI_MAX_SWEEPS: usize = 100;
const ABERTH_MAX_ITERS: usize = 1000;

/// Frobenius norm, an upper bound for the spectral norm.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise deviation of `m` from its conjugate transpose.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the unitary matrix whose
/// columns are the matching eigenvectors. Only the Hermitian part of `m`
/// is seen by the iteration.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix), LinalgError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "square matrix required");
    if n == 1 {
        return Ok((vec![m[(0, 0)].re], CMatrix::identity(1, 1)));
    }
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
    }
    let mut v = CMatrix::identity(n, n);
    let scale = frobenius(&a).max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence(format!(
            "Jacobi sweeps exhausted for a {n}x{n} matrix"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / r;
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U = diag(1, conj(phase)) * [[c, s], [-s, c]] acting on the (p, q) plane.
    let upp = C64::new(c, 0.0);
    let upq = C64::new(s, 0.0);
    let uqp = -phase.conj() * s;
    let uqq = phase.conj() * c;

    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * upp + akq * uqp;
        a[(k, q)] = akp * upq + akq * uqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
        a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * upp + vkq * uqp;
        v[(k, q)] = vkp * upq + vkq * uqq;
    }
}

/// Characteristic polynomial det(λI − m) by the Samuelson–Berkowitz
/// recursion. Coefficients are returned highest degree first (monic).
pub fn charpoly(m: &CMatrix) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return vec![C64::new(1.0, 0.0)];
    }
    // Start from the trailing 1x1 block and grow towards the full matrix.
    let mut poly = vec![C64::new(1.0, 0.0), -m[(n - 1, n - 1)]];
    for start in (0..n - 1).rev() {
        let size = n - start;
        let a11 = m[(start, start)];
        let row: Vec<C64> = (start + 1..n).map(|j| m[(start, j)]).collect();
        let col: Vec<C64> = (start + 1..n).map(|i| m[(i, start)]).collect();
        let sub = m.view((start + 1, start + 1), (size - 1, size - 1));

        // First column of the Toeplitz factor: 1, -a11, -R C, -R A1 C, ...
        let mut toeplitz = vec![C64::new(1.0, 0.0), -a11];
        let mut w = col.clone();
        for _ in 0..size - 1 {
            let rc: C64 = row.iter().zip(&w).map(|(r, c)| r * c).sum();
            toeplitz.push(-rc);
            w = (0..size - 1)
                .map(|i| (0..size - 1).map(|j| sub[(i, j)] * w[j]).sum())
                .collect();
        }
        let mut next = vec![C64::new(0.0, 0.0); size + 1];
        for (i, slot) in next.iter_mut().enumerate() {
            for (j, &pj) in poly.iter().enumerate() {
                if i >= j {
                    *slot += toeplitz[i - j] * pj;
                }
            }
        }
        poly = next;
    }
    poly
}

/// Horner evaluation of a polynomial with coefficients highest degree first.
pub fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs
        .iter()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Σ |c_k| max(1, |z|)^k, the scale against which a residual |p(z)| is judged.
pub fn poly_scale(coeffs: &[C64], z: C64) -> f64 {
    let r = z.norm().max(1.0);
    coeffs.iter().fold(0.0, |acc, c| acc * r + c.norm())
}

/// All roots of a polynomial (highest degree first, nonzero leading term)
/// by Aberth–Ehrlich simultaneous iteration.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>, LinalgError> {
    let lead = coeffs[0];
    let monic: Vec<C64> = coeffs.iter().map(|c| c / lead).collect();
    let deg = monic.len() - 1;
    if deg == 0 {
        return Ok(vec![]);
    }
    let deriv: Vec<C64> = monic[..deg]
        .iter()
        .enumerate()
        .map(|(i, c)| c * (deg - i) as f64)
        .collect();

    let radius = 1.0 + monic[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..deg)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            C64::from_polar(0.5 * radius, angle)
        })
        .collect();

    for _ in 0..ABERTH_MAX_ITERS {
        let mut biggest_step = 0.0f64;
        for i in 0..deg {
            let p = poly_eval(&monic, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let dp = poly_eval(&deriv, z[i]);
            let ratio = p / dp;
            let repulsion: C64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d.norm() == 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                biggest_step = biggest_step.max(step.norm() / (1.0 + z[i].norm()));
            } else {
                // Stationary point of p: nudge off it.
                z[i] += C64::new(1e-8 * radius, 1e-8 * radius);
                biggest_step = f64::INFINITY;
            }
        }
        if biggest_step < 1e-15 {
            break;
        }
    }

    for &root in &z {
        let residual = poly_eval(&monic, root).norm();
        if residual.is_nan() || residual > 1e-8 * poly_scale(&monic, root) {
            return Err(LinalgError::NoConvergence(format!(
                "polynomial root {root} has residual {residual:e}"
            )));
        }
    }
    Ok(z)
}

/// Eigenvalues of a square complex matrix.
///
/// With `hermitian_hint` the Jacobi path is used and real values come back
/// in ascending order; otherwise the roots of the characteristic polynomial
/// are found by simultaneous iteration and sorted by (re, im).
pub fn eigenvalues(m: &CMatrix, hermitian_hint: bool) -> Result<Vec<C64>, LinalgError> {
    if hermitian_hint {
        let (values, _) = hermitian_eigen(m)?;
        return Ok(values.into_iter().map(|x| C64::new(x, 0.0)).collect());
    }
    let mut roots = poly_roots(&charpoly(m))?;
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// Determinant by LU factorization with partial pivoting.
pub fn determinant(m: &CMatrix) -> C64 {
    m.clone().lu().determinant()
}
