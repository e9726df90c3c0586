//! Truncated SVD of the document-term matrix.
//!
//! Small matrices go through an exact one-sided Jacobi decomposition; larger
//! corpora use randomized projection with power iterations and only ever
//! densify an l x vocab sketch.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DiversityError;

/// Box-Muller standard normal sample.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>();
        let v: f64 = rng.random::<f64>();
        if u > f64::MIN_POSITIVE {
            return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

/// Everything beyond this edge length switches Auto mode to the randomized
/// path.
const EXACT_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMode {
    /// Exact below [`EXACT_LIMIT`], randomized above.
    Auto,
    Exact,
    Randomized,
}

#[derive(Debug, Clone, Copy)]
pub struct SvdOptions {
    pub mode: SvdMode,
    /// Extra sketch columns beyond the requested rank.
    pub oversample: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            mode: SvdMode::Auto,
            oversample: 10,
            power_iterations: 4,
            seed: 0,
        }
    }
}

/// Rank-truncated factorization A ~= U S V^T.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Singular values, descending.
    pub singular_values: Vec<f64>,
    /// n_rows x rank left factors, already scaled: row i holds (U S)_i.
    pub row_factors: Vec<Vec<f64>>,
    /// n_cols x rank right singular vectors V.
    pub col_factors: Vec<Vec<f64>>,
}

impl TruncatedSvd {
    /// Frobenius norm of A - U_k S_k V_k^T for sparse rows of A.
    pub fn reconstruction_error(&self, rows: &[Vec<(usize, f64)>], n_cols: usize) -> f64 {
        let rank = self.singular_values.len();
        let mut sum = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let mut dense = vec![0.0; n_cols];
            for &(j, v) in row {
                dense[j] = v;
            }
            for (j, value) in dense.iter().enumerate() {
                let mut approx = 0.0;
                for d in 0..rank {
                    approx += self.row_factors[i][d] * self.col_factors[j][d];
                }
                let diff = value - approx;
                sum += diff * diff;
            }
        }
        sum.sqrt()
    }
}

/// Truncated SVD of a sparse row matrix (`rows[i]` holds `(col, value)`
/// pairs), keeping the top `dims` singular triplets.
pub fn truncated_svd(
    rows: &[Vec<(usize, f64)>],
    n_cols: usize,
    dims: usize,
    options: &SvdOptions,
) -> Result<TruncatedSvd, DiversityError> {
    let n_rows = rows.len();
    if n_rows == 0 || n_cols == 0 {
        return Err(DiversityError::EmptyCorpus);
    }
    let max_dims = n_rows.min(n_cols);
    if dims == 0 || dims > max_dims {
        return Err(DiversityError::DimsOutOfRange { dims, max: max_dims });
    }
    let exact = match options.mode {
        SvdMode::Exact => true,
        SvdMode::Randomized => false,
        SvdMode::Auto => n_rows <= EXACT_LIMIT && n_cols <= EXACT_LIMIT,
    };
    if exact {
        exact_svd(rows, n_cols, dims)
    } else {
        randomized_svd(rows, n_cols, dims, options)
    }
}

fn densify(rows: &[Vec<(usize, f64)>], n_cols: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            let mut dense = vec![0.0; n_cols];
            for &(j, v) in row {
                dense[j] = v;
            }
            dense
        })
        .collect()
}

fn exact_svd(
    rows: &[Vec<(usize, f64)>],
    n_cols: usize,
    dims: usize,
) -> Result<TruncatedSvd, DiversityError> {
    let n_rows = rows.len();
    let dense = densify(rows, n_cols);
    // One-sided Jacobi orthogonalizes columns; run on whichever orientation
    // has the fewer columns and swap factors back afterwards.
    if n_cols <= n_rows {
        let (u, sigma, v) = jacobi_svd(dense);
        Ok(assemble(u, sigma, v, dims))
    } else {
        let transposed = transpose(&dense);
        let (u, sigma, v) = jacobi_svd(transposed);
        // A^T = U S V^T  =>  A = V S U^T.
        Ok(assemble(v, sigma, u, dims))
    }
}

fn assemble(u: Vec<Vec<f64>>, sigma: Vec<f64>, v: Vec<Vec<f64>>, dims: usize) -> TruncatedSvd {
    let singular_values: Vec<f64> = sigma.iter().take(dims).copied().collect();
    let row_factors = u
        .iter()
        .map(|row| (0..dims).map(|d| row[d] * sigma[d]).collect())
        .collect();
    let col_factors = v.iter().map(|row| row[..dims].to_vec()).collect();
    TruncatedSvd {
        singular_values,
        row_factors,
        col_factors,
    }
}

/// One-sided Jacobi SVD of a dense matrix with n_cols <= n_rows preferred.
/// Returns (U, sigma, V) with columns of U orthonormal where sigma > 0,
/// sigma descending, V orthogonal.
fn jacobi_svd(mut a: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let n_rows = a.len();
    let n_cols = a[0].len();
    let mut v: Vec<Vec<f64>> = (0..n_cols)
        .map(|i| (0..n_cols).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let column_dot = |m: &[Vec<f64>], p: usize, q: usize| -> f64 {
        m.iter().map(|row| row[p] * row[q]).sum()
    };

    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n_cols {
            for q in (p + 1)..n_cols {
                let alpha = column_dot(&a, p, p);
                let beta = column_dot(&a, q, q);
                let gamma = column_dot(&a, p, q);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt().max(f64::MIN_POSITIVE) {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in a.iter_mut() {
                    let (rp, rq) = (row[p], row[q]);
                    row[p] = c * rp - s * rq;
                    row[q] = s * rp + c * rq;
                }
                for row in v.iter_mut() {
                    let (rp, rq) = (row[p], row[q]);
                    row[p] = c * rp - s * rq;
                    row[q] = s * rp + c * rq;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort descending.
    let mut sigma: Vec<f64> = (0..n_cols)
        .map(|j| (0..n_rows).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n_cols).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));

    let mut u = vec![vec![0.0; n_cols]; n_rows];
    let mut v_sorted = vec![vec![0.0; n_cols]; n_cols];
    let mut sigma_sorted = vec![0.0; n_cols];
    for (new_j, &old_j) in order.iter().enumerate() {
        let norm = sigma[old_j];
        sigma_sorted[new_j] = norm;
        if norm > 0.0 {
            for i in 0..n_rows {
                u[i][new_j] = a[i][old_j] / norm;
            }
        }
        for i in 0..n_cols {
            v_sorted[i][new_j] = v[i][old_j];
        }
    }
    sigma = sigma_sorted;
    (u, sigma, v_sorted)
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = m.len();
    let cols = m[0].len();
    let mut out = vec![vec![0.0; rows]; cols];
    for (i, row) in m.iter().enumerate() {
        for (j, &value) in row.iter().enumerate() {
            out[j][i] = value;
        }
    }
    out
}

/// y = A x for sparse rows.
fn sparse_matvec(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|row| row.iter().map(|&(j, v)| v * x[j]).sum())
        .collect()
}

/// z = A^T y for sparse rows.
fn sparse_t_matvec(rows: &[Vec<(usize, f64)>], y: &[f64], n_cols: usize) -> Vec<f64> {
    let mut z = vec![0.0; n_cols];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            z[j] += v * y[i];
        }
    }
    z
}

/// Modified Gram-Schmidt on the columns of `m` (given column-major).
/// Columns that collapse to zero are left as zeros.
fn orthonormalize_columns(columns: &mut [Vec<f64>]) {
    for j in 0..columns.len() {
        for i in 0..j {
            let dot: f64 = columns[i]
                .iter()
                .zip(columns[j].iter())
                .map(|(a, b)| a * b)
                .sum();
            let (left, right) = columns.split_at_mut(j);
            for (a, b) in left[i].iter().zip(right[0].iter_mut()) {
                *b -= dot * a;
            }
        }
        let norm: f64 = columns[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in columns[j].iter_mut() {
                *x /= norm;
            }
        } else {
            for x in columns[j].iter_mut() {
                *x = 0.0;
            }
        }
    }
}

fn randomized_svd(
    rows: &[Vec<(usize, f64)>],
    n_cols: usize,
    dims: usize,
    options: &SvdOptions,
) -> Result<TruncatedSvd, DiversityError> {
    let n_rows = rows.len();
    let sketch = (dims + options.oversample).min(n_rows.min(n_cols));
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    // Y = A * Omega, column by column.
    let mut y_columns: Vec<Vec<f64>> = (0..sketch)
        .map(|_| {
            let omega: Vec<f64> = (0..n_cols).map(|_| standard_normal(&mut rng)).collect();
            sparse_matvec(rows, &omega)
        })
        .collect();
    orthonormalize_columns(&mut y_columns);

    for _ in 0..options.power_iterations {
        let mut z_columns: Vec<Vec<f64>> = y_columns
            .iter()
            .map(|q| sparse_t_matvec(rows, q, n_cols))
            .collect();
        orthonormalize_columns(&mut z_columns);
        y_columns = z_columns.iter().map(|z| sparse_matvec(rows, z)).collect();
        orthonormalize_columns(&mut y_columns);
    }

    // B = Q^T A, as a (n_cols x sketch) matrix so Jacobi sees few columns.
    let b_transposed: Vec<Vec<f64>> = {
        let mut bt = vec![vec![0.0; sketch]; n_cols];
        for (s, q) in y_columns.iter().enumerate() {
            let row = sparse_t_matvec(rows, q, n_cols); // (Q^T A) row s
            for (j, &value) in row.iter().enumerate() {
                bt[j][s] = value;
            }
        }
        bt
    };
    // B^T = (V_B) S (U_B)^T with our jacobi on columns: B^T = U' S V'^T where
    // U' is n_cols x sketch and V' is sketch x sketch. Then B = V' S U'^T,
    // so A ~= Q B = (Q V') S U'^T: left factors Q V', right factors U'.
    let (u_prime, sigma, v_prime) = jacobi_svd(b_transposed);

    let dims = dims.min(sigma.len());
    let mut row_factors = vec![vec![0.0; dims]; n_rows];
    for i in 0..n_rows {
        for d in 0..dims {
            let mut acc = 0.0;
            for (s, q) in y_columns.iter().enumerate() {
                acc += q[i] * v_prime[s][d];
            }
            row_factors[i][d] = acc * sigma[d];
        }
    }
    let col_factors: Vec<Vec<f64>> = u_prime.iter().map(|row| row[..dims].to_vec()).collect();
    Ok(TruncatedSvd {
        singular_values: sigma[..dims].to_vec(),
        row_factors,
        col_factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse_rows(dense: &[&[f64]]) -> Vec<Vec<(usize, f64)>> {
        dense
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn diagonal_matrix_singular_values() {
        let rows = sparse_rows(&[&[3.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 1.0]]);
        let svd = truncated_svd(&rows, 3, 2, &SvdOptions::default()).unwrap();
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((svd.singular_values[1] - 2.0).abs() < 1e-12);
        // Dropping the sigma=1 direction leaves squared error 1.
        let err = svd.reconstruction_error(&rows, 3);
        assert!((err * err - 1.0).abs() < 1e-10, "err^2 = {}", err * err);
    }

    #[test]
    fn identical_rows_project_identically() {
        let rows = sparse_rows(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        let svd = truncated_svd(&rows, 2, 1, &SvdOptions::default()).unwrap();
        for row in &svd.row_factors {
            assert!((row[0] - svd.row_factors[0][0]).abs() < 1e-10);
        }
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let rows = sparse_rows(&[
            &[1.0, 2.0, 0.5],
            &[0.0, 1.0, -1.0],
            &[3.0, 0.0, 2.0],
        ]);
        let svd = truncated_svd(&rows, 3, 3, &SvdOptions::default()).unwrap();
        assert!(svd.reconstruction_error(&rows, 3) < 1e-6);
    }

    #[test]
    fn right_factors_are_orthonormal() {
        let rows = sparse_rows(&[
            &[1.0, 0.3, 0.0, 2.0],
            &[0.4, 1.0, 1.0, 0.0],
            &[0.0, 2.0, 0.5, 1.0],
        ]);
        let svd = truncated_svd(&rows, 4, 3, &SvdOptions::default()).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                let dot: f64 = (0..4).map(|j| svd.col_factors[j][p] * svd.col_factors[j][q]).sum();
                let expected = if p == q { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-6, "V^T V [{p}][{q}] = {dot}");
            }
        }
    }

    #[test]
    fn dims_out_of_range_is_an_error() {
        let rows = sparse_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(truncated_svd(&rows, 2, 3, &SvdOptions::default()).is_err());
        assert!(truncated_svd(&rows, 2, 0, &SvdOptions::default()).is_err());
    }

    #[test]
    fn randomized_matches_exact_error_on_decaying_spectrum() {
        // Build a 40 x 60 matrix with a rapidly decaying spectrum by summing
        // a few outer products.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut dense = vec![vec![0.0; 60]; 40];
        for r in 0..8 {
            let scale = 10.0 / (1 << r) as f64;
            let left: Vec<f64> = (0..40).map(|_| standard_normal(&mut rng)).collect();
            let right: Vec<f64> = (0..60).map(|_| standard_normal(&mut rng)).collect();
            for i in 0..40 {
                for j in 0..60 {
                    dense[i][j] += scale * left[i] * right[j];
                }
            }
        }
        let rows: Vec<Vec<(usize, f64)>> = dense
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, v)| (j, *v)).collect())
            .collect();
        let exact = truncated_svd(&rows, 60, 6, &SvdOptions { mode: SvdMode::Exact, ..Default::default() }).unwrap();
        let randomized = truncated_svd(
            &rows,
            60,
            6,
            &SvdOptions {
                mode: SvdMode::Randomized,
                oversample: 10,
                power_iterations: 6,
                seed: 11,
            },
        )
        .unwrap();
        let exact_err = exact.reconstruction_error(&rows, 60);
        let randomized_err = randomized.reconstruction_error(&rows, 60);
        assert!(
            randomized_err <= exact_err * 1.02 + 1e-9,
            "randomized {randomized_err} vs exact {exact_err}"
        );
        for (a, b) in exact.singular_values.iter().zip(&randomized.singular_values) {
            assert!((a - b).abs() / a.max(1e-12) < 0.02);
        }
    }

    #[test]
    fn randomized_is_deterministic_for_a_seed() {
        let rows = sparse_rows(&[
            &[1.0, 0.0, 2.0, 0.0],
            &[0.0, 1.0, 0.0, 0.5],
            &[2.0, 0.3, 0.0, 0.0],
        ]);
        let options = SvdOptions {
            mode: SvdMode::Randomized,
            oversample: 2,
            power_iterations: 2,
            seed: 7,
        };
        let a = truncated_svd(&rows, 4, 2, &options).unwrap();
        let b = truncated_svd(&rows, 4, 2, &options).unwrap();
        assert_eq!(a.singular_values, b.singular_values);
        assert_eq!(a.row_factors, b.row_factors);
    }

}
