//! Dense symmetric-definite eigendecompositions and the fractional powers
//! built from them.
//!
//! For a pencil `(A, M)` with `M` definite, `A Φ = M Φ diag(λ)` and
//! `Φᵀ M Φ = I`. The operator `M⁻¹A` then has fractional powers
//! `Φ diag(λ^s) Φᵀ M`, which come in two matrix realizations:
//!
//! * dual to coefficient, `Φ diag(λ^{-s}) Φᵀ`: solves with `A^s`;
//! * coefficient to dual, `M Φ diag(λ^s) Φᵀ M`: the form of `A^s`.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, MatRef, Par, Side};

use crate::fem::{CoeffVector, DualVector, LevelMatrices};
use crate::linalg;
use crate::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralPair {
    eigenvalues: Vec<f64>,
    /// `Φ`, mass-orthonormal columns.
    vectors: Mat<f64>,
    /// `M Φ`.
    mass_vectors: Mat<f64>,
}

/// Reduces `(A, M)` to `L⁻¹ A L⁻ᵀ` with `M = L Lᵀ`.
fn reduce(a: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<(Mat<f64>, Mat<f64>)> {
    if a.nrows() != a.ncols() || m.nrows() != m.ncols() || a.nrows() != m.nrows() {
        return Err(Error::InvalidArgument(format!(
            "pencil shapes {}x{} and {}x{} do not match",
            a.nrows(),
            a.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    let llt = m.llt(Side::Lower).map_err(|_| Error::IndefiniteMass)?;
    let l = llt.L().to_owned();
    let mut c = a.to_owned();
    solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), Par::Seq);
    let mut c = c.transpose().to_owned();
    solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), Par::Seq);
    linalg::symmetrize(&mut c);
    Ok((c, l))
}

/// Eigenvalues of the pencil `(A, M)`, ascending.
pub fn generalized_eigenvalues(a: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let (c, _) = reduce(a, m)?;
    linalg::symmetric_eigenvalues(c.as_ref())
}

/// Full eigendecomposition of the pencil `(A, M)`.
pub fn generalized_eig(a: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<SpectralPair> {
    let (c, l) = reduce(a, m)?;
    let evd = c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let eigenvalues: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let mut vectors = evd.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), vectors.as_mut(), Par::Seq);
    let mass_vectors = m * &vectors;
    let pair = SpectralPair { eigenvalues, vectors, mass_vectors };
    pair.check_residual(a)?;
    Ok(pair)
}

impl SpectralPair {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `M Φ`.
    pub fn mass_vectors(&self) -> MatRef<'_, f64> {
        self.mass_vectors.as_ref()
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("empty pencil")
    }

    /// Largest relative residual `‖Aφ - λMφ‖ / (λ_max ‖Mφ‖)` over a sample of
    /// eigenpairs (all of them for small pencils).
    pub fn residual(&self, a: MatRef<'_, f64>) -> f64 {
        let n = self.dim();
        let cols: Vec<usize> = if n <= 64 { (0..n).collect() } else { (0..16).map(|i| i * (n - 1) / 15).collect() };
        let lmax = self.max_eigenvalue().abs().max(f64::MIN_POSITIVE);
        cols.into_iter()
            .map(|j| {
                let phi = linalg::column(self.vectors.as_ref(), j);
                let aphi = linalg::gemv(a, &phi);
                let mphi = linalg::column(self.mass_vectors.as_ref(), j);
                let r: Vec<f64> = aphi.iter().zip(&mphi).map(|(x, y)| x - self.eigenvalues[j] * y).collect();
                linalg::norm(&r) / (lmax * linalg::norm(&mphi))
            })
            .fold(0.0, f64::max)
    }

    fn check_residual(&self, a: MatRef<'_, f64>) -> Result<()> {
        let residual = self.residual(a);
        if residual > RESIDUAL_TOL {
            return Err(Error::EigenResidual { residual, tolerance: RESIDUAL_TOL });
        }
        Ok(())
    }

    /// `Φ diag(λ^{-s}) Φᵀ d` on a raw dual vector.
    pub fn frac_apply_raw(&self, s: f64, d: &[f64]) -> Vec<f64> {
        let mut w = linalg::gemv_transpose(self.vectors.as_ref(), d);
        for (wi, &l) in w.iter_mut().zip(&self.eigenvalues) {
            *wi *= l.powf(-s);
        }
        linalg::gemv(self.vectors.as_ref(), &w)
    }

    /// `M Φ diag(λ^s) Φᵀ M c` on a raw coefficient vector.
    pub fn frac_apply_dualform_raw(&self, s: f64, c: &[f64]) -> Vec<f64> {
        let mut w = linalg::gemv_transpose(self.mass_vectors.as_ref(), c);
        for (wi, &l) in w.iter_mut().zip(&self.eigenvalues) {
            *wi *= l.powf(s);
        }
        linalg::gemv(self.mass_vectors.as_ref(), &w)
    }

    /// Solve with the `s`-th power: dual in, coefficient out, same tags.
    pub fn frac_apply(&self, s: f64, d: &DualVector) -> Result<CoeffVector> {
        d.expect(d.space, d.level, self.dim())?;
        Ok(d.with_values(self.frac_apply_raw(s, &d.values)))
    }

    /// The `s`-th power as a form: coefficient in, dual out, same tags.
    pub fn frac_apply_dualform(&self, s: f64, c: &CoeffVector) -> Result<DualVector> {
        c.expect(c.space, c.level, self.dim())?;
        Ok(c.with_values(self.frac_apply_dualform_raw(s, &c.values)))
    }

    /// Dense `Φ diag(λ^{-s}) Φᵀ`.
    pub fn frac_matrix(&self, s: f64) -> Mat<f64> {
        scaled_gram(self.vectors.as_ref(), &self.eigenvalues, -s)
    }

    /// Dense `M Φ diag(λ^s) Φᵀ M`.
    pub fn dualform_matrix(&self, s: f64) -> Mat<f64> {
        scaled_gram(self.mass_vectors.as_ref(), &self.eigenvalues, s)
    }
}

/// `X diag(λ^p) Xᵀ`, symmetrized.
fn scaled_gram(x: MatRef<'_, f64>, eigenvalues: &[f64], p: f64) -> Mat<f64> {
    let scaled = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * eigenvalues[j].powf(p));
    let mut out = &scaled * x.transpose();
    linalg::symmetrize(&mut out);
    out
}

/// `A^s` for a symmetric positive semidefinite matrix. Eigenvalues below
/// `1e-13 · λ_max` are treated as exact zeros, and `0^0 = 1`.
pub fn symmetric_power(a: MatRef<'_, f64>, s: f64) -> Result<Mat<f64>> {
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let ev: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let lmax = ev.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cut = 1e-13 * lmax;
    let powered: Vec<f64> = ev
        .iter()
        .map(|&x| {
            if x <= cut {
                if s == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                x.powf(s)
            }
        })
        .collect();
    let u = evd.U();
    let scaled = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * powered[j]);
    let mut out = &scaled * u.transpose();
    linalg::symmetrize(&mut out);
    Ok(out)
}

/// The pencil `(Λ, M_V)` of one level.
pub fn lambda_pair(level: &LevelMatrices) -> Result<SpectralPair> {
    generalized_eig(level.lambda_dense().as_ref(), level.mass_v_dense().as_ref())
}

/// The pencil `(Dᵀ M_V⁻¹ D, M_S)` of one level: the discrete Laplacian on `S`.
pub fn laplacian_pair(level: &LevelMatrices) -> Result<SpectralPair> {
    generalized_eig(level.laplacian_dense()?.as_ref(), level.mass_s_dense().as_ref())
}

/// Discrete inf-sup constant of the divergence: `β²` is the smallest
/// eigenvalue of the pencil `(Dᵀ Λ⁻¹ D, M_S)`.
pub fn inf_sup_beta(level: &LevelMatrices) -> Result<f64> {
    let d = linalg::to_dense(&level.grad);
    let linv_d = linalg::spd_solve(level.lambda_dense().as_ref(), d.as_ref())?;
    let mut b = d.transpose() * &linv_d;
    linalg::symmetrize(&mut b);
    let ev = generalized_eigenvalues(b.as_ref(), level.mass_s_dense().as_ref())?;
    if ev[0] <= 0.0 {
        return Err(Error::Singular("discrete gradient is not injective".into()));
    }
    Ok(ev[0].sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Space;
    use crate::mesh::MeshLevel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> Mat<f64> {
        let g = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut a = g.transpose() * &g;
        for i in 0..n {
            a[(i, i)] += shift;
        }
        a
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        linalg::norm(&diff) / linalg::norm(b)
    }

    #[test]
    fn identical_pencil_has_unit_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_spd(6, 1.0, &mut rng);
        let sp = generalized_eig(m.as_ref(), m.as_ref()).unwrap();
        assert!(sp.eigenvalues().iter().all(|&l| (l - 1.0).abs() < 1e-12));
        let gram = sp.vectors().transpose() * &m * sp.vectors();
        for i in 0..6 {
            for j in 0..6 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_pencil_is_sorted() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { [2.0, 1.0][i] } else { 0.0 });
        let id = Mat::<f64>::identity(2, 2);
        let sp = generalized_eig(a.as_ref(), id.as_ref()).unwrap();
        assert!((sp.eigenvalues()[0] - 1.0).abs() < 1e-15 && (sp.eigenvalues()[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_mass_is_rejected() {
        let a = Mat::<f64>::identity(2, 2);
        let m = Mat::from_fn(2, 2, |i, j| if i == j { [1.0, -1.0][i] } else { 0.0 });
        assert!(matches!(generalized_eig(a.as_ref(), m.as_ref()), Err(Error::IndefiniteMass)));
    }

    #[test]
    fn endpoint_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(8, 0.5, &mut rng);
        let m = random_spd(8, 2.0, &mut rng);
        let sp = generalized_eig(a.as_ref(), m.as_ref()).unwrap();
        let d = random_vec(8, &mut rng);
        let direct = linalg::column(
            linalg::spd_solve(a.as_ref(), Mat::from_fn(8, 1, |i, _| d[i]).as_ref()).unwrap().as_ref(),
            0,
        );
        assert!(rel_err(&sp.frac_apply_raw(1.0, &d), &direct) < 1e-10);
        let mass_solve = linalg::column(
            linalg::spd_solve(m.as_ref(), Mat::from_fn(8, 1, |i, _| d[i]).as_ref()).unwrap().as_ref(),
            0,
        );
        assert!(rel_err(&sp.frac_apply_raw(0.0, &d), &mass_solve) < 1e-10);
        let c = random_vec(8, &mut rng);
        assert!(rel_err(&sp.frac_apply_dualform_raw(1.0, &c), &linalg::gemv(a.as_ref(), &c)) < 1e-10);
        assert!(rel_err(&sp.frac_apply_dualform_raw(0.0, &c), &linalg::gemv(m.as_ref(), &c)) < 1e-10);
    }

    #[test]
    fn lambda_pencil_on_single_cell() {
        let lvl = LevelMatrices::assemble(&MeshLevel::uniform(1).unwrap(), 0);
        let sp = generalized_eig(lvl.lambda_dense().as_ref(), lvl.mass_v_dense().as_ref()).unwrap();
        assert_eq!(sp.dim(), 5);
        assert!((sp.min_eigenvalue() - 1.0).abs() < 1e-12);
        assert!(sp.eigenvalues().iter().all(|&l| l >= 1.0 - 1e-12));
    }

    #[test]
    fn tagged_applications_keep_tags() {
        let lvl = LevelMatrices::assemble(&MeshLevel::uniform(2).unwrap(), 3);
        let sp = generalized_eig(lvl.lambda_dense().as_ref(), lvl.mass_v_dense().as_ref()).unwrap();
        let d = DualVector::new(Space::RaviartThomas, 3, vec![1.0; lvl.dim_v()]);
        let c = sp.frac_apply(0.4, &d).unwrap();
        assert_eq!((c.space, c.level), (Space::RaviartThomas, 3));
        let back = sp.frac_apply_dualform(0.4, &c).unwrap();
        assert!(rel_err(&back.values, &d.values) < 1e-10);
        let short = DualVector::new(Space::RaviartThomas, 3, vec![1.0; 3]);
        assert!(sp.frac_apply(0.4, &short).is_err());
    }

    #[test]
    fn dense_matrices_agree_with_applications() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_spd(7, 0.3, &mut rng);
        let m = random_spd(7, 1.0, &mut rng);
        let sp = generalized_eig(a.as_ref(), m.as_ref()).unwrap();
        let x = random_vec(7, &mut rng);
        for s in [-0.5, 0.3, 1.0] {
            assert!(rel_err(&linalg::gemv(sp.frac_matrix(s).as_ref(), &x), &sp.frac_apply_raw(s, &x)) < 1e-12);
            assert!(
                rel_err(&linalg::gemv(sp.dualform_matrix(s).as_ref(), &x), &sp.frac_apply_dualform_raw(s, &x)) < 1e-12
            );
        }
    }

    #[test]
    fn symmetric_power_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_spd(5, 0.1, &mut rng);
        let p1 = symmetric_power(a.as_ref(), 1.0).unwrap();
        assert!(linalg::max_abs(linalg::sub(p1.as_ref(), a.as_ref()).as_ref()) < 1e-12);
        let p0 = symmetric_power(a.as_ref(), 0.0).unwrap();
        assert!(linalg::max_abs(linalg::sub(p0.as_ref(), Mat::<f64>::identity(5, 5).as_ref()).as_ref()) < 1e-12);
        let half = symmetric_power(a.as_ref(), 0.5).unwrap();
        let sq = &half * &half;
        assert!(linalg::max_abs(linalg::sub(sq.as_ref(), a.as_ref()).as_ref()) < 1e-11);
    }

    #[test]
    fn inf_sup_constant_is_at_most_one() {
        for n in [1, 2, 4] {
            let lvl = LevelMatrices::assemble(&MeshLevel::uniform(n).unwrap(), 0);
            let beta = inf_sup_beta(&lvl).unwrap();
            assert!(beta > 0.0 && beta <= 1.0, "n={n} beta={beta}");
        }
    }

    #[test]
    fn inf_sup_on_single_cell_by_brute_force() {
        // β² = min over unit S-vectors of uᵀ Dᵀ Λ⁻¹ D u / uᵀ M_S u, a 2x2 problem.
        let lvl = LevelMatrices::assemble(&MeshLevel::uniform(1).unwrap(), 0);
        let d = linalg::to_dense(&lvl.grad);
        let linv_d = linalg::spd_solve(lvl.lambda_dense().as_ref(), d.as_ref()).unwrap();
        let b = d.transpose() * &linv_d;
        let (m0, m1) = (lvl.mass_s[0], lvl.mass_s[1]);
        let min_ratio = (0..=200_000)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 200_000.0;
                let u = [th.cos(), th.sin()];
                let num = u[0] * u[0] * b[(0, 0)] + 2.0 * u[0] * u[1] * b[(0, 1)] + u[1] * u[1] * b[(1, 1)];
                num / (m0 * u[0] * u[0] + m1 * u[1] * u[1])
            })
            .fold(f64::INFINITY, f64::min);
        let beta = inf_sup_beta(&lvl).unwrap();
        assert!((beta * beta - min_ratio).abs() < 1e-8);
    }
}
