use faer::Mat;

use super::{CoeffVector, LevelMatrices, Space};
use crate::linalg;
use crate::Result;

/// `τ = ∇_h u + curl q`, with the coefficient vectors of both parts.
#[derive(Debug, Clone)]
pub struct HelmholtzParts {
    pub u: CoeffVector,
    /// Potential normalized by `q[0] = 0`.
    pub q: CoeffVector,
    /// `V` coefficients of `∇_h u`.
    pub gradient_part: Vec<f64>,
    /// `V` coefficients of `curl q`.
    pub curl_part: Vec<f64>,
}

/// Discrete Helmholtz decomposition of a `V` coefficient vector by two dense
/// Galerkin solves. Intended for verification on small meshes.
pub fn helmholtz_decompose(level: &LevelMatrices, tau: &CoeffVector) -> Result<HelmholtzParts> {
    tau.expect(Space::RaviartThomas, level.level, level.dim_v())?;
    let mass = level.mass_v_dense();

    // (Dᵀ M⁻¹ D) u = Dᵀ τ
    let a = level.laplacian_dense()?;
    let rhs = linalg::spmv_transpose(&level.grad, &tau.values);
    let u = solve_vec(&a, &rhs)?;
    let du = linalg::spmv(&level.grad, &u);
    let gradient_part = linalg::column(linalg::spd_solve(mass.as_ref(), as_col(&du).as_ref())?.as_ref(), 0);

    // (Cᵀ M C) q = Kᵀ τ, with the constant kernel removed by pinning q[0].
    let c = linalg::to_dense(&level.curl_coefficients);
    let mut kk = c.transpose() * linalg::to_dense(&level.curl);
    linalg::symmetrize(&mut kk);
    let mut rhs = linalg::spmv_transpose(&level.curl, &tau.values);
    for j in 0..kk.ncols() {
        kk[(0, j)] = 0.0;
        kk[(j, 0)] = 0.0;
    }
    kk[(0, 0)] = 1.0;
    rhs[0] = 0.0;
    let q = solve_vec(&kk, &rhs)?;
    let curl_part = linalg::spmv(&level.curl_coefficients, &q);

    Ok(HelmholtzParts {
        u: CoeffVector::new(Space::PiecewiseConstant, level.level, u),
        q: CoeffVector::new(Space::Lagrange, level.level, q),
        gradient_part,
        curl_part,
    })
}

fn as_col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn solve_vec(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    Ok(linalg::column(linalg::spd_solve(a.as_ref(), as_col(b).as_ref())?.as_ref(), 0))
}
