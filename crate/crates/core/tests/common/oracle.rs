//! Reference computations that share no code with the library.
//!
//! Singular values come from the eigenvalues of the Gram matrix, found by a
//! two-sided cyclic Jacobi iteration on the real symmetric embedding
//! `[[X, -Y], [Y, X]]` of the Hermitian matrix `X + iY`. Each eigenvalue of
//! the Hermitian matrix appears twice in the embedding.

#![allow(dead_code)]

use rbqr_core::matrix::Matrix;

/// Eigenvalues of a real symmetric matrix stored row-major, descending.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    let at = |a: &Vec<f64>, i: usize, j: usize| a[i * n + j];
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += at(&a, i, i) * at(&a, i, i);
            for j in 0..n {
                if i != j {
                    off += at(&a, i, j) * at(&a, i, j);
                }
            }
        }
        if off <= 1e-32 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = at(&a, p, q);
                if apq == 0.0 {
                    continue;
                }
                let zeta = (at(&a, q, q) - at(&a, p, p)) / (2.0 * apq);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (at(&a, k, p), at(&a, k, q));
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (at(&a, p, k), at(&a, q, k));
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| at(&a, i, i)).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Singular values of `a`, descending, `min(rows, cols)` of them.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    // Gram matrix of the smaller side, formed entry by entry.
    let (p, gram): (usize, Box<dyn Fn(usize, usize) -> num_complex::Complex<f64>>) = if m <= n {
        (m, Box::new(move |i, j| (0..n).map(|k| a.get(i, k) * a.get(j, k).conj()).sum()))
    } else {
        (n, Box::new(move |i, j| (0..m).map(|k| a.get(k, i).conj() * a.get(k, j)).sum()))
    };
    let d = 2 * p;
    let mut e = vec![0.0; d * d];
    for i in 0..p {
        for j in 0..p {
            let g = gram(i, j);
            e[i * d + j] = g.re;
            e[(i + p) * d + (j + p)] = g.re;
            e[(i + p) * d + j] = g.im;
            e[i * d + (j + p)] = -g.im;
        }
    }
    symmetric_eigenvalues(e, d).iter().step_by(2).map(|&l| l.max(0.0).sqrt()).collect()
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.rows() == 0 || a.cols() == 0 {
        return 0.0;
    }
    singular_values(a)[0]
}

/// `||s - Q Q^H s||_2` computed with two classical Gram-Schmidt passes.
pub fn projection_residual(q: &Matrix, s: &[num_complex::Complex<f64>]) -> f64 {
    let mut r = s.to_vec();
    for _ in 0..2 {
        for j in 0..q.cols() {
            let c: num_complex::Complex<f64> = q.col(j).iter().zip(&r).map(|(x, y)| x.conj() * y).sum();
            for (ri, qi) in r.iter_mut().zip(q.col(j)) {
                *ri -= c * qi;
            }
        }
    }
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
