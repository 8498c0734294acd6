//! Dense linear-algebra primitives used by the solvers.
//!
//! Matrices and vectors are plain `nalgebra` dynamic types. The factored
//! rank-r representation [`LowRankFactors`] is the state carried by the
//! low-rank solver; every contract on it is stated at reconstruction level,
//! since singular vectors are only defined up to sign (or rotation under
//! repeated singular values).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Orthonormality defect above which factors get re-orthonormalized.
const ORTHO_REPAIR_TOL: f64 = 1e-10;

/// Thin factorization `U diag(s) Vᵀ` with orthonormal columns in `U`, `V`
/// and singular values sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    pub u: Matrix,
    pub s: Vector,
    pub v: Matrix,
}

/// Output of [`svd_top`]; same layout as the solver state.
pub type SvdTriple = LowRankFactors;

impl LowRankFactors {
    pub fn new(u: Matrix, s: Vector, v: Matrix) -> Result<Self> {
        let k = s.len();
        if u.ncols() != k || v.ncols() != k {
            return Err(Error::param(format!(
                "factor shapes disagree: U has {} columns, V has {}, s has {} entries",
                u.ncols(),
                v.ncols(),
                k
            )));
        }
        if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::input("singular values must be finite and nonnegative"));
        }
        if s.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::input("singular values must be sorted descending"));
        }
        Ok(Self { u, s, v })
    }

    /// Rank-r zero matrix with canonical basis factors.
    pub fn zeros(d1: usize, d2: usize, r: usize) -> Self {
        Self {
            u: Matrix::identity(d1, r),
            s: Vector::zeros(r),
            v: Matrix::identity(d2, r),
        }
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank_bound(&self) -> usize {
        self.s.len()
    }

    /// Number of singular values above `tol · s[0]`.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        let top = self.s.get(0).copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&x| x > tol * top).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*sj);
        }
        us * self.v.transpose()
    }

    pub fn operator_norm(&self) -> f64 {
        self.s.get(0).copied().unwrap_or(0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.s.norm()
    }
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::input(format!("{what} has non-finite entries")))
    }
}

/// Best rank-`r` approximation of `m` in Frobenius norm.
pub fn svd_top(m: &Matrix, r: usize) -> Result<SvdTriple> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::param(format!(
            "rank {r} out of range for a {rows}x{cols} matrix"
        )));
    }
    check_finite(m, "matrix")?;
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors were requested");
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    order.truncate(r);

    let u_top = Matrix::from_fn(rows, r, |i, j| u[(i, order[j])]);
    let v_top = Matrix::from_fn(cols, r, |i, j| v_t[(order[j], i)]);
    let s_top = Vector::from_iterator(r, order.iter().map(|&k| sv[k].max(0.0)));
    Ok(LowRankFactors {
        u: u_top,
        s: s_top,
        v: v_top,
    })
}

/// Thin QR with `R` carrying a nonnegative diagonal.
pub fn qr_thin(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::param(format!(
            "thin QR needs rows >= cols, got {rows}x{cols}"
        )));
    }
    check_finite(a, "matrix")?;
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    Ok((q, r))
}

/// Keeps the `k` largest-magnitude entries of `v`; ties go to the lower index.
pub fn hard_threshold(v: &Vector, k: usize) -> Result<Vector> {
    let d = v.len();
    if k > d {
        return Err(Error::param(format!("cannot keep {k} entries of a {d}-vector")));
    }
    let mut out = Vector::zeros(d);
    for j in top_k_indices(v.as_slice(), k) {
        out[j] = v[j];
    }
    Ok(out)
}

/// Indices of the `k` largest `|v[j]|`, ordered by decreasing magnitude.
pub(crate) fn top_k_indices(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    let by_magnitude = |&a: &usize, &b: &usize| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b));
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, by_magnitude);
    }
    idx.truncate(k);
    idx.sort_by(by_magnitude);
    idx
}

fn check_tangent_shapes(u: &Matrix, v: &Matrix, g: &Matrix) -> Result<()> {
    if u.ncols() != v.ncols() || u.nrows() != g.nrows() || v.nrows() != g.ncols() {
        return Err(Error::param(format!(
            "tangent projection shapes disagree: U {}x{}, V {}x{}, G {}x{}",
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    Ok(())
}

/// Projection onto the tangent space of the fixed-rank manifold at a point
/// with column/row spaces `U`, `V`:
/// `UUᵀG + GVVᵀ − UUᵀGVVᵀ`.
pub fn tangent_project(u: &Matrix, v: &Matrix, g: &Matrix) -> Result<Matrix> {
    check_tangent_shapes(u, v, g)?;
    let ut_g = u.transpose() * g; // r x d2
    let g_v = g * v; // d1 x r
    let core = &ut_g * v; // r x r
    Ok(u * ut_g + (g_v - u * core) * v.transpose())
}

/// `SVD_r(M − η·P_T(G))` via the dense route: materialize the stepped matrix
/// and truncate. Reference path for [`retract_fast`].
pub fn retract_dense(current: &LowRankFactors, g: &Matrix, eta: f64) -> Result<LowRankFactors> {
    check_step(current, g, eta)?;
    let step = tangent_project(&current.u, &current.v, g)?;
    let stepped = current.reconstruct() - step * eta;
    svd_top(&stepped, current.rank_bound())
}

fn check_step(current: &LowRankFactors, g: &Matrix, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param(format!("stepsize must be positive, got {eta}")));
    }
    check_tangent_shapes(&current.u, &current.v, g)?;
    check_finite(g, "subgradient")
}

/// Same result as [`retract_dense`], computed from two thin QRs of d×r panels
/// and the SVD of a 2r×2r core. The stepped matrix is
///
/// ```text
/// [U Q2] · | Σ − η UᵀGV   −η R1ᵀ | · [V Q1]ᵀ
///          | −η R2          0    |
/// ```
///
/// with `Q1 R1 = (I − VVᵀ)GᵀU` and `Q2 R2 = (I − UUᵀ)GV`.
pub fn retract_fast(current: &LowRankFactors, g: &Matrix, eta: f64) -> Result<LowRankFactors> {
    check_step(current, g, eta)?;
    let (u, v) = (&current.u, &current.v);
    let r = current.rank_bound();

    let gt_u = g.transpose() * u; // d2 x r
    let g_v = g * v; // d1 x r
    let ut_g_v = u.transpose() * &g_v; // r x r

    // Projecting twice keeps the panels orthogonal to U/V after roundoff.
    let mut panel1 = &gt_u - v * ut_g_v.transpose();
    panel1 -= v * (v.transpose() * &panel1);
    let mut panel2 = &g_v - u * &ut_g_v;
    panel2 -= u * (u.transpose() * &panel2);

    let (q1, r1) = qr_thin_padded(&panel1);
    let (q2, r2) = qr_thin_padded(&panel2);

    let mut core = Matrix::zeros(2 * r, 2 * r);
    for i in 0..r {
        for j in 0..r {
            let diag = if i == j { current.s[i] } else { 0.0 };
            core[(i, j)] = diag - eta * ut_g_v[(i, j)];
            core[(i, r + j)] = -eta * r1[(j, i)];
            core[(r + i, j)] = -eta * r2[(i, j)];
        }
    }
    let small = svd_top(&core, r)?;

    let left = concat_cols(u, &q2) * &small.u;
    let right = concat_cols(v, &q1) * &small.v;
    let mut out = LowRankFactors {
        u: left,
        s: small.s,
        v: right,
    };
    repair_orthonormality(&mut out);
    Ok(out)
}

/// Thin QR of a d×r panel. When d < r (only possible in degenerate
/// full-rank settings) the panel is zero-padded so `R` stays r×r.
fn qr_thin_padded(panel: &Matrix) -> (Matrix, Matrix) {
    let (d, r) = panel.shape();
    if d >= r {
        // Finite by construction, so the only failure mode (shape) is excluded.
        return qr_thin(panel).expect("panel shape checked");
    }
    let (q, r_small) = {
        let qr = panel.clone().qr();
        (qr.q(), qr.r())
    };
    let mut q_full = Matrix::zeros(d, r);
    q_full.columns_mut(0, q.ncols()).copy_from(&q);
    let mut r_full = Matrix::zeros(r, r);
    r_full.rows_mut(0, r_small.nrows()).copy_from(&r_small);
    (q_full, r_full)
}

fn concat_cols(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub(crate) fn orthonormality_defect(q: &Matrix) -> f64 {
    let gram = q.transpose() * q;
    (gram - Matrix::identity(q.ncols(), q.ncols())).amax()
}

/// Restores orthonormal factor columns when rank deficiency let the
/// retraction basis pick up arbitrary directions. Only columns whose
/// singular value is negligible can be affected, so the reconstruction
/// moves by at most roundoff.
fn repair_orthonormality(f: &mut LowRankFactors) {
    if orthonormality_defect(&f.u) > ORTHO_REPAIR_TOL {
        gram_schmidt_columns(&mut f.u);
    }
    if orthonormality_defect(&f.v) > ORTHO_REPAIR_TOL {
        gram_schmidt_columns(&mut f.v);
    }
}

fn gram_schmidt_columns(q: &mut Matrix) {
    let (d, k) = q.shape();
    for j in 0..k {
        let mut col = q.column(j).clone_owned();
        orthogonalize_against(&mut col, q, j);
        let mut norm = col.norm();
        if norm < 1e-8 {
            // Dependent column: substitute the canonical basis vector with the
            // largest component left after projection.
            let mut best = (0.0, Vector::zeros(d));
            for e in 0..d {
                let mut cand = Vector::zeros(d);
                cand[e] = 1.0;
                orthogonalize_against(&mut cand, q, j);
                let n = cand.norm();
                if n > best.0 {
                    best = (n, cand);
                }
            }
            col = best.1;
            norm = best.0;
        }
        q.column_mut(j).copy_from(&(col / norm));
    }
}

fn orthogonalize_against(col: &mut Vector, q: &Matrix, upto: usize) {
    for _ in 0..2 {
        for i in 0..upto {
            let qi = q.column(i);
            let c = qi.dot(col);
            col.axpy(-c, &qi, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    /// Singular values from a cyclic Jacobi eigen-solve of MᵀM; shares no
    /// code with the bidiagonalization route used by `svd_top`.
    fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
        let mut a = m.transpose() * m;
        let n = a.nrows();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)].max(0.0).sqrt()).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    #[test]
    fn svd_top_keeps_dominant_pair() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0]));
        let t = svd_top(&m, 1).unwrap();
        assert!((t.s[0] - 3.0).abs() < 1e-14);
        let rec = t.reconstruct();
        let expected = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        assert!((rec - expected).amax() < 1e-14);
    }

    #[test]
    fn svd_top_of_zero_matrix() {
        let t = svd_top(&Matrix::zeros(3, 3), 2).unwrap();
        assert_eq!(t.s.as_slice(), &[0.0, 0.0]);
        assert_eq!(t.reconstruct().amax(), 0.0);
    }

    #[test]
    fn svd_top_residual_matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 6, 4);
            let t = svd_top(&m, 2).unwrap();
            let sv = jacobi_singular_values(&m);
            let expected = (sv[2] * sv[2] + sv[3] * sv[3]).sqrt();
            let got = (&m - t.reconstruct()).norm();
            assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
            assert!(orthonormality_defect(&t.u) < 1e-10);
            assert!(orthonormality_defect(&t.v) < 1e-10);
        }
    }

    #[test]
    fn svd_top_rejects_bad_rank_and_nan() {
        let m = Matrix::zeros(3, 2);
        assert!(matches!(svd_top(&m, 0), Err(Error::Parameter(_))));
        assert!(matches!(svd_top(&m, 3), Err(Error::Parameter(_))));
        let mut bad = Matrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(svd_top(&bad, 1), Err(Error::Input(_))));
    }

    #[test]
    fn wide_matrix_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 3, 7);
        let t = svd_top(&m, 3).unwrap();
        assert!((t.reconstruct() - &m).amax() < 1e-12);
    }

    #[test]
    fn qr_examples() {
        let (q, r) = qr_thin(&Matrix::identity(3, 3)).unwrap();
        assert!((q - Matrix::identity(3, 3)).amax() < 1e-15);
        assert!((r - Matrix::identity(3, 3)).amax() < 1e-15);

        let (q, r) = qr_thin(&Matrix::from_column_slice(2, 1, &[3.0, 4.0])).unwrap();
        assert!((q[(0, 0)] - 0.6).abs() < 1e-15 && (q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-14);

        assert!(matches!(qr_thin(&Matrix::zeros(2, 3)), Err(Error::Parameter(_))));
    }

    #[test]
    fn qr_reconstructs_random_panel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 8, 3);
        let (q, r) = qr_thin(&a).unwrap();
        assert_eq!(q.shape(), (8, 3));
        assert!((&q * &r - &a).amax() < 1e-10);
        assert!(orthonormality_defect(&q) < 1e-10);
        for i in 0..3 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn hard_threshold_examples() {
        let v = Vector::from_vec(vec![3.0, -5.0, 2.0, 0.0]);
        assert_eq!(hard_threshold(&v, 2).unwrap().as_slice(), &[3.0, -5.0, 0.0, 0.0]);
        let v = Vector::from_vec(vec![2.0, 2.0, 1.0]);
        assert_eq!(hard_threshold(&v, 1).unwrap().as_slice(), &[2.0, 0.0, 0.0]);
        assert_eq!(hard_threshold(&v, 0).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
        assert!(matches!(hard_threshold(&v, 4), Err(Error::Parameter(_))));
    }

    #[test]
    fn hard_threshold_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let v = Vector::from_fn(50, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let got = hard_threshold(&v, 7).unwrap();
            let mut pairs: Vec<(f64, usize)> = v.iter().map(|x| x.abs()).zip(0..).collect();
            pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let mut oracle: Vec<usize> = pairs[..7].iter().map(|p| p.1).collect();
            oracle.sort();
            let support: Vec<usize> = (0..50).filter(|&j| got[j] != 0.0).collect();
            assert_eq!(support, oracle);
        }
    }

    #[test]
    fn tangent_project_rank_one_basis() {
        let e1 = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let g = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = tangent_project(&e1, &e1, &g).unwrap();
        assert_eq!(p, Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 0.0]));
    }

    #[test]
    fn tangent_project_fixes_tangent_vectors_and_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (u, _) = qr_thin(&random_matrix(&mut rng, 10, 2)).unwrap();
        let (v, _) = qr_thin(&random_matrix(&mut rng, 8, 2)).unwrap();

        let a = random_matrix(&mut rng, 8, 2);
        let b = random_matrix(&mut rng, 10, 2);
        let tangent = &u * a.transpose() + &b * v.transpose();
        let p = tangent_project(&u, &v, &tangent).unwrap();
        assert!((&p - &tangent).amax() < 1e-12);

        let g = random_matrix(&mut rng, 10, 8);
        let pu = &u * u.transpose();
        let pv = &v * v.transpose();
        let dense = &pu * &g + &g * &pv - &pu * &g * &pv;
        let p = tangent_project(&u, &v, &g).unwrap();
        assert!((&p - &dense).amax() < 1e-10);
        let again = tangent_project(&u, &v, &p).unwrap();
        assert!((&again - &p).amax() < 1e-10);
        let sv = jacobi_singular_values(&p);
        assert!(sv[4] < 1e-6 * sv[0], "rank exceeds 2r: {sv:?}");
    }

    #[test]
    fn tangent_project_shape_mismatch() {
        let u = Matrix::identity(3, 1);
        let v = Matrix::identity(2, 1);
        assert!(matches!(
            tangent_project(&u, &v, &Matrix::zeros(2, 2)),
            Err(Error::Parameter(_))
        ));
    }

    fn random_factors(rng: &mut ChaCha8Rng, d1: usize, d2: usize, r: usize) -> LowRankFactors {
        svd_top(&(random_matrix(rng, d1, r) * random_matrix(rng, r, d2)), r).unwrap()
    }

    fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn retract_with_zero_direction_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let f = random_factors(&mut rng, 7, 5, 2);
        let out = retract_fast(&f, &Matrix::zeros(7, 5), 0.3).unwrap();
        assert!(rel_diff(&out.reconstruct(), &f.reconstruct()) < 1e-12);
    }

    #[test]
    fn retract_fast_matches_dense_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let f = random_factors(&mut rng, 12, 9, 3);
            let g = random_matrix(&mut rng, 12, 9);
            let eta = 0.05 + rng.random::<f64>();
            let fast = retract_fast(&f, &g, eta).unwrap();
            let dense = retract_dense(&f, &g, eta).unwrap();
            assert!(rel_diff(&fast.reconstruct(), &dense.reconstruct()) < 1e-9);
            assert!(orthonormality_defect(&fast.u) < 1e-10);
            assert!(orthonormality_defect(&fast.v) < 1e-10);
        }
    }

    #[test]
    fn retract_fast_full_rank_degenerate_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let f = random_factors(&mut rng, 4, 6, 4);
        let g = random_matrix(&mut rng, 4, 6);
        let fast = retract_fast(&f, &g, 0.4).unwrap();
        let dense = retract_dense(&f, &g, 0.4).unwrap();
        assert!(rel_diff(&fast.reconstruct(), &dense.reconstruct()) < 1e-9);
        assert!(orthonormality_defect(&fast.u) < 1e-10);
    }

    #[test]
    fn retract_from_zero_point_stays_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let f = LowRankFactors::zeros(6, 5, 2);
        let g = random_matrix(&mut rng, 6, 5);
        let fast = retract_fast(&f, &g, 1.0).unwrap();
        let dense = retract_dense(&f, &g, 1.0).unwrap();
        assert!(rel_diff(&fast.reconstruct(), &dense.reconstruct()) < 1e-9);
        assert!(orthonormality_defect(&fast.u) < 1e-10);
        assert!(orthonormality_defect(&fast.v) < 1e-10);
    }

    #[test]
    fn retract_rejects_nonpositive_step() {
        let f = LowRankFactors::zeros(3, 3, 1);
        assert!(matches!(
            retract_fast(&f, &Matrix::zeros(3, 3), 0.0),
            Err(Error::Parameter(_))
        ));
    }
}
