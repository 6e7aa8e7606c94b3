//! Small dense helpers on `Vec<f64>` plus thin wrappers over nalgebra.

use nalgebra::{DMatrix, DVector};

pub const PIVOT_TOL: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

/// Residual of `v` after removing its components along the orthonormal set
/// `basis`, with one round of re-orthogonalization.
pub fn reject(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&r, b);
            axpy(-c, b, &mut r);
        }
    }
    r
}

/// Modified Gram-Schmidt. Returns the index of the first vector whose
/// residual falls below the pivot tolerance.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, usize> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        let scale = norm(v).max(1.0);
        let r = reject(v, &out);
        let rn = norm(&r);
        if rn <= PIVOT_TOL * scale {
            return Err(i);
        }
        out.push(scaled(1.0 / rn, &r));
    }
    Ok(out)
}

/// Orthonormal basis of the orthogonal complement of `ortho` in `R^dim`.
/// Standard basis vectors are added greedily by largest residual.
pub fn complement(ortho: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut basis = ortho.to_vec();
    let mut out = Vec::new();
    while basis.len() < dim {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..dim {
            let r = reject(&unit(dim, i), &basis);
            let rn = norm(&r);
            if best.as_ref().is_none_or(|(bn, _)| rn > *bn) {
                best = Some((rn, r));
            }
        }
        let (rn, r) = best.expect("dim > 0");
        if rn <= PIVOT_TOL {
            break;
        }
        let u = scaled(1.0 / rn, &r);
        basis.push(u.clone());
        out.push(u);
    }
    out
}

/// Least squares by column-pivoted Householder QR. Returns the solution and
/// the numerical rank; in the rank-deficient case the minimum-norm solution,
/// through a second QR of the leading rows of `R`.
///
/// nalgebra's SVD is avoided here: with clustered singular values its
/// singular vectors can be off by far more than round-off.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let (m, k) = a.shape();
    if m == 0 || k == 0 {
        return (DVector::zeros(k), 0);
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let steps = m.min(k);
    let lead = r[(0, 0)].abs();
    let tol = lead * 1e-12 * (m.max(k) as f64);
    let rank = (0..steps).take_while(|&i| r[(i, i)].abs() > tol).count();
    if rank == 0 {
        return (DVector::zeros(k), 0);
    }
    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let c = qtb.rows(0, rank).into_owned();
    let mut y = if rank == k {
        r.view((0, 0), (k, k)).into_owned().solve_upper_triangular(&c).expect("nonzero diagonal")
    } else {
        // [R11 R12] y = c with minimal ‖y‖: with [R11 R12]ᵀ = Q2 R2,
        // y = Q2 R2⁻ᵀ c.
        let t = r.view((0, 0), (rank, k)).transpose();
        let qr2 = t.qr();
        let u = qr2.r().transpose().solve_lower_triangular(&c).expect("full row rank");
        qr2.q() * u
    };
    qr.p().inv_permute_rows(&mut y);
    (y, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_dimensions_add_up() {
        let s = orthonormalize(&[vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0, 0.0]]).unwrap();
        let c = complement(&s, 4);
        assert_eq!(c.len(), 2);
        for u in &c {
            for v in &s {
                assert!(dot(u, v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dependent_vectors_are_reported() {
        let r = orthonormalize(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(r.unwrap_err(), 1);
    }

    #[test]
    fn least_squares_with_clustered_singular_values() {
        // Columns with equal norms and small correlations give a repeated
        // singular value; the solution must still match the exact one.
        let m = 64;
        let a = DMatrix::from_fn(m, 4, |i, j| {
            let t = i as f64 / m as f64;
            match j {
                0 => (2.0 * std::f64::consts::PI * t).cos(),
                1 => (2.0 * std::f64::consts::PI * t).sin(),
                2 => (4.0 * std::f64::consts::PI * t).cos(),
                _ => 1.0,
            }
        });
        let x_true = DVector::from_vec(vec![0.7, -1.3, 0.2, 2.5]);
        let b = &a * &x_true;
        let (x, rank) = lstsq(&a, &b);
        assert_eq!(rank, 4);
        assert!((x - x_true).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_least_squares_is_minimum_norm() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let (x, rank) = lstsq(&a, &b);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
