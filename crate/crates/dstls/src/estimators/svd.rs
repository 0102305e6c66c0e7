//! One-sided Jacobi SVD for tall skinny (m x 4) matrices.
//!
//! The one-sided variant orthogonalizes the columns by plane rotations, which
//! keeps small singular values accurate even when the column norms differ by
//! many orders of magnitude (here: volt-scale vs ampere-scale columns).

use crate::{Error, Result};

pub const SVD_COLS: usize = 4;

/// Thin SVD of an m x 4 matrix: `u` is m x 4 with orthonormal columns,
/// `sigma` holds the four singular values in descending order, `v` is 4 x 4
/// orthogonal. `A = u * diag(sigma) * v^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Vec<[f64; SVD_COLS]>,
    pub sigma: [f64; SVD_COLS],
    pub v: [[f64; SVD_COLS]; SVD_COLS],
}

impl SvdResult {
    /// Right singular vector (column of V) for singular value `j`.
    pub fn v_col(&self, j: usize) -> [f64; SVD_COLS] {
        [self.v[0][j], self.v[1][j], self.v[2][j], self.v[3][j]]
    }
}

/// Computes the thin SVD of `h` (rows of 4 entries, at least 4 rows).
pub fn svd(h: &[[f64; SVD_COLS]]) -> Result<SvdResult> {
    let m = h.len();
    if m < SVD_COLS {
        return Err(Error::InvalidArg(format!("svd needs >= {SVD_COLS} rows, got {m}")));
    }
    if h.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArg("non-finite entry in svd input".into()));
    }

    // Work on columns of a copy of H; accumulate rotations into V.
    let mut a = h.to_vec();
    let mut v = [[0.0; SVD_COLS]; SVD_COLS];
    for (j, row) in v.iter_mut().enumerate() {
        row[j] = 1.0;
    }

    const TOL: f64 = 1e-15;
    const MAX_SWEEPS: usize = 60;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..SVD_COLS - 1 {
            for q in p + 1..SVD_COLS {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for row in &a {
                    app += row[p] * row[p];
                    aqq += row[q] * row[q];
                    apq += row[p] * row[q];
                }
                if apq.abs() <= TOL * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                // Jacobi rotation zeroing the (p, q) inner product.
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in a.iter_mut() {
                    let (xp, xq) = (row[p], row[q]);
                    row[p] = c * xp - s * xq;
                    row[q] = s * xp + c * xq;
                }
                for row in v.iter_mut() {
                    let (xp, xq) = (row[p], row[q]);
                    row[p] = c * xp - s * xq;
                    row[q] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = [0.0; SVD_COLS];
    let mut u = vec![[0.0; SVD_COLS]; m];
    for j in 0..SVD_COLS {
        let norm = a.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt();
        sigma[j] = norm;
        if norm > 0.0 {
            for (ur, ar) in u.iter_mut().zip(&a) {
                ur[j] = ar[j] / norm;
            }
        }
    }

    // Sort descending, permuting U and V columns along.
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    let sigma_sorted = order.map(|j| sigma[j]);
    let mut u_sorted = vec![[0.0; SVD_COLS]; m];
    let mut v_sorted = [[0.0; SVD_COLS]; SVD_COLS];
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..m {
            u_sorted[r][dst] = u[r][src];
        }
        for r in 0..SVD_COLS {
            v_sorted[r][dst] = v[r][src];
        }
    }
    sigma = sigma_sorted;
    u = u_sorted;
    v = v_sorted;

    // Zero singular values leave zero U columns; complete them to an
    // orthonormal set so that U^T U = I holds for the thin factor.
    for j in 0..SVD_COLS {
        if sigma[j] > 0.0 {
            continue;
        }
        let mut col = vec![0.0; m];
        'candidates: for cand in 0..m {
            for x in col.iter_mut() {
                *x = 0.0;
            }
            col[cand] = 1.0;
            // Gram-Schmidt against all other (already orthonormal) columns.
            for _ in 0..2 {
                for other in 0..SVD_COLS {
                    if other == j {
                        continue;
                    }
                    let dot: f64 = u.iter().zip(&col).map(|(ur, &x)| ur[other] * x).sum();
                    for (ur, x) in u.iter().zip(col.iter_mut()) {
                        *x -= dot * ur[other];
                    }
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for (ur, &x) in u.iter_mut().zip(&col) {
                    ur[j] = x / norm;
                }
                break 'candidates;
            }
        }
    }

    Ok(SvdResult { u, sigma, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frob(h: &[[f64; 4]]) -> f64 {
        h.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_contract(h: &[[f64; 4]]) {
        let r = svd(h).unwrap();
        let m = h.len();
        // Reconstruction.
        let mut err = 0.0f64;
        for i in 0..m {
            for j in 0..4 {
                let mut x = 0.0;
                for k in 0..4 {
                    x += r.u[i][k] * r.sigma[k] * r.v[j][k];
                }
                err += (x - h[i][j]) * (x - h[i][j]);
            }
        }
        let scale = frob(h).max(1e-300);
        assert!(err.sqrt() <= 1e-10 * scale, "reconstruction {} vs {}", err.sqrt(), scale);
        // Orthonormality of U and V columns.
        for p in 0..4 {
            for q in 0..4 {
                let want = if p == q { 1.0 } else { 0.0 };
                let uu: f64 = (0..m).map(|i| r.u[i][p] * r.u[i][q]).sum();
                let vv: f64 = (0..4).map(|i| r.v[i][p] * r.v[i][q]).sum();
                assert!((uu - want).abs() <= 1e-10, "U^TU[{p}][{q}] = {uu}");
                assert!((vv - want).abs() <= 1e-10, "V^TV[{p}][{q}] = {vv}");
            }
        }
        // Descending, non-negative.
        for j in 0..4 {
            assert!(r.sigma[j] >= 0.0);
            if j > 0 {
                assert!(r.sigma[j - 1] >= r.sigma[j]);
            }
        }
    }

    #[test]
    fn diagonal_case() {
        let mut h = [[0.0; 4]; 4];
        h[0][0] = 3.0;
        h[1][1] = 4.0;
        let r = svd(&h).unwrap();
        assert_eq!(r.sigma, [4.0, 3.0, 0.0, 0.0]);
        check_contract(&h);
    }

    #[test]
    fn identity_case() {
        let mut h = [[0.0; 4]; 4];
        for j in 0..4 {
            h[j][j] = 1.0;
        }
        let r = svd(&h).unwrap();
        assert_eq!(r.sigma, [1.0, 1.0, 1.0, 1.0]);
        check_contract(&h);
    }

    #[test]
    fn random_matrices_meet_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = rng.random_range(4..=120);
            let h: Vec<[f64; 4]> = (0..m)
                .map(|_| std::array::from_fn(|_| rng.random_range(-5.0..5.0)))
                .collect();
            check_contract(&h);
        }
    }

    #[test]
    fn badly_scaled_columns() {
        // Column norms spanning ten orders of magnitude.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scales = [1e-6, 1e2, 1.0, 1e-4];
        let h: Vec<[f64; 4]> = (0..60)
            .map(|_| std::array::from_fn(|j| scales[j] * rng.random_range(-1.0..1.0f64)))
            .collect();
        check_contract(&h);
    }

    #[test]
    fn row_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut h: Vec<[f64; 4]> = (0..40)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let s1 = svd(&h).unwrap().sigma;
        h.reverse();
        h.swap(3, 17);
        let s2 = svd(&h).unwrap().sigma;
        for j in 0..4 {
            assert!((s1[j] - s2[j]).abs() <= 1e-10 * s1[0]);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(svd(&[[0.0; 4]; 3]).is_err());
        let mut h = [[0.0; 4]; 5];
        h[2][1] = f64::NAN;
        assert!(svd(&h).is_err());
    }
}
