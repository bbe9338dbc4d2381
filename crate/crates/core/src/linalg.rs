//! Small dense helpers over nalgebra used by the ALS engine.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
pub fn symmetric_eigen_desc(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps nalgebra's order among exact ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Subtracts each column's mean.
pub fn center_columns(m: &mut DMatrix<f64>) {
    let n = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

/// Modified Gram-Schmidt, run twice, of `v` against the unit columns in
/// `basis`. Returns the normalized remainder, or `None` when `v` lies (to
/// working precision) in their span.
pub fn orthogonalize_against(mut v: DVector<f64>, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    let original = v.norm();
    if original == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let proj = b.dot(&v);
            v.axpy(-proj, b, 1.0);
        }
    }
    let norm = v.norm();
    if norm <= 1e-8 * original {
        return None;
    }
    Some(v / norm)
}

/// Smallest singular value, relative to the largest, still treated as a
/// direction of the target. Eigenvalues of `ZᵀZ` resolve singular values
/// only to about the square root of machine precision.
const RANK_TOLERANCE: f64 = 1e-7;

/// Closest centered matrix with `XᵀX = n·I` to a centered target `z` in the
/// least-squares sense: the polar factor `√n · U Vᵀ` of `z = U S Vᵀ`.
///
/// `V` and `S²` come from the symmetric eigendecomposition of `zᵀz`, and
/// `U` from the normalized columns of `z V`, re-orthogonalized in order of
/// decreasing singular value.
/// Directions with vanishing singular values are completed by Gram-Schmidt
/// against the constant vector and the retained directions, trying the
/// matching column of `previous` first and then random draws from `rng`.
/// Returns the new scores and the 1-based dimensions that needed completion.
pub fn procrustes_scores<R: Rng>(
    z: &DMatrix<f64>,
    previous: Option<&DMatrix<f64>>,
    rng: &mut R,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let (n, p) = z.shape();
    if p + 1 > n {
        return Err(Error::RankCollapse { dimension: n });
    }
    let (squares, v) = symmetric_eigen_desc(z.transpose() * z);
    let largest = squares[0].max(0.0);
    let cutoff = RANK_TOLERANCE * RANK_TOLERANCE * largest;

    let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut basis = vec![ones];
    let mut cols: Vec<Option<DVector<f64>>> = vec![None; p];
    for (i, col) in cols.iter_mut().enumerate() {
        if largest > 0.0 && squares[i] > cutoff {
            if let Some(c) = orthogonalize_against(z * v.column(i), &basis) {
                basis.push(c.clone());
                *col = Some(c);
            }
        }
    }
    let mut completed = Vec::new();
    for i in 0..p {
        if cols[i].is_some() {
            continue;
        }
        let mut found = previous
            .map(|prev| prev.column(i).into_owned())
            .and_then(|cand| orthogonalize_against(cand, &basis));
        let mut attempts = 0;
        while found.is_none() && attempts < 16 {
            let cand = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            found = orthogonalize_against(cand, &basis);
            attempts += 1;
        }
        let c = found.ok_or(Error::RankCollapse { dimension: i + 1 })?;
        basis.push(c.clone());
        cols[i] = Some(c);
        completed.push(i + 1);
    }
    let u = DMatrix::from_columns(&cols.into_iter().map(Option::unwrap).collect::<Vec<_>>());
    Ok((u * v.transpose() * (n as f64).sqrt(), completed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_orthonormal(x: &DMatrix<f64>) {
        let n = x.nrows() as f64;
        let gram = x.transpose() * x;
        for r in 0..x.ncols() {
            assert!(x.column(r).sum().abs() < 1e-9, "column {r} not centered");
            for c in 0..x.ncols() {
                let expected = if r == c { n } else { 0.0 };
                assert!((gram[(r, c)] - expected).abs() < 1e-6, "gram[{r},{c}] = {}", gram[(r, c)]);
            }
        }
    }

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = symmetric_eigen_desc(m);
        assert_eq!(vals, vec![5.0, 2.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn procrustes_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut z = DMatrix::from_fn(20, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        center_columns(&mut z);
        let (x, completed) = procrustes_scores(&z, None, &mut rng).unwrap();
        assert!(completed.is_empty());
        check_orthonormal(&x);
        // Optimality: tr(XᵀZ) equals √n times the nuclear norm of Z.
        let nuclear: f64 = z.clone().svd(false, false).singular_values.sum();
        assert!(((x.transpose() * &z).trace() - 20f64.sqrt() * nuclear).abs() < 1e-8);
    }

    #[test]
    fn procrustes_with_close_singular_values() {
        // Target with known singular values 75, 5.811 and 5.475.
        let (n, p) = (500, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = DMatrix::from_fn(n, p + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        g.column_mut(0).fill(1.0);
        let q = g.qr().q();
        let left = q.columns(1, p).into_owned();
        let right = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal)).qr().q();
        let sigma = [75.0, 5.811, 5.475];
        let z = &left * DMatrix::from_diagonal(&DVector::from_column_slice(&sigma)) * right.transpose();
        let (x, completed) = procrustes_scores(&z, None, &mut rng).unwrap();
        assert!(completed.is_empty());
        check_orthonormal(&x);
        let best = (n as f64).sqrt() * sigma.iter().sum::<f64>();
        assert!(((x.transpose() * &z).trace() - best).abs() < 1e-9 * best);
        let expected = left * right.transpose() * (n as f64).sqrt();
        assert!((x - expected).amax() < 1e-9);
    }

    #[test]
    fn procrustes_completes_rank_deficient_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut z = DMatrix::from_fn(15, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        z.column_mut(2).fill(0.0);
        center_columns(&mut z);
        let (x, completed) = procrustes_scores(&z, None, &mut rng).unwrap();
        assert_eq!(completed.len(), 1);
        check_orthonormal(&x);
    }

    #[test]
    fn too_many_dimensions_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = DMatrix::zeros(3, 3);
        assert!(matches!(procrustes_scores(&z, None, &mut rng), Err(Error::RankCollapse { .. })));
    }
}
