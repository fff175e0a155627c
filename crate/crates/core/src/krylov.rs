//! Preconditioned conjugate gradients over tagged vectors.
//!
//! The unknown lives in representation `X`, the operator maps `X` to its dual
//! `Y`, and the preconditioner maps `Y` back to `X`. Every inner product is a
//! duality pairing between an `X` and a `Y` vector, so the iteration is the
//! same whether `X` is the coefficient or the dual representation.

use faer::Mat;

use crate::fem::{pairing, Representation, Space, TaggedVector};
use crate::linalg;
use crate::spectral;
use crate::{Error, Result};

/// A linear map from one representation to its dual.
pub trait Operator<R: Representation>: Sync {
    fn apply(&self, x: &TaggedVector<R>) -> Result<TaggedVector<R::Dual>>;
}

impl<R, F> Operator<R> for F
where
    R: Representation,
    F: Fn(&TaggedVector<R>) -> Result<TaggedVector<R::Dual>> + Sync,
{
    fn apply(&self, x: &TaggedVector<R>) -> Result<TaggedVector<R::Dual>> {
        self(x)
    }
}

/// How the relative preconditioned residual is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMeasure {
    /// `⟨B r_k, r_k⟩ / ⟨B r_0, r_0⟩`.
    #[default]
    EnergyRatio,
    /// `‖r_k‖_B / ‖r_0‖_B`, the square root of the energy ratio.
    NormRatio,
}

impl ResidualMeasure {
    fn of(self, energy_ratio: f64) -> f64 {
        match self {
            ResidualMeasure::EnergyRatio => energy_ratio,
            ResidualMeasure::NormRatio => energy_ratio.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PcgOptions {
    /// Bound on the relative preconditioned residual, in units of `measure`.
    pub tol: f64,
    pub max_iter: usize,
    pub measure: ResidualMeasure,
}

impl PcgOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter, measure: ResidualMeasure::default() }
    }

    pub fn with_measure(mut self, measure: ResidualMeasure) -> Self {
        self.measure = measure;
        self
    }
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self::new(1e-9, 500)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `λ_max / λ_min` of the Lanczos tridiagonal built from the CG scalars.
    pub cond_estimate: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Relative preconditioned residuals in the requested measure, starting
    /// with 1 at iteration 0.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

/// Extreme Ritz values of the Lanczos matrix implied by CG step lengths
/// `alphas` and direction updates `betas`; `betas.len() ≥ alphas.len() - 1`.
pub fn lanczos_extremes(alphas: &[f64], betas: &[f64]) -> Result<(f64, f64)> {
    let k = alphas.len();
    if k == 0 {
        return Ok((1.0, 1.0));
    }
    let mut t = Mat::<f64>::zeros(k, k);
    for j in 0..k {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < k {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let ev = linalg::symmetric_eigenvalues(t.as_ref())?;
    Ok((ev[0], ev[k - 1]))
}

/// Solves `op x = rhs` by preconditioned conjugate gradients from `x0`.
///
/// Stops when the relative preconditioned residual drops to `tol` or after
/// `max_iter` steps; a run that hits the limit returns `converged == false`
/// rather than an error. Non-positive curvature of either map is an error.
pub fn pcg<X, A, B>(
    op: &A,
    precond: &B,
    rhs: &TaggedVector<X::Dual>,
    x0: TaggedVector<X>,
    opts: &PcgOptions,
) -> Result<(TaggedVector<X>, SolveReport)>
where
    X: Representation,
    A: Operator<X> + ?Sized,
    B: Operator<X::Dual> + ?Sized,
{
    rhs.expect(x0.space, x0.level, x0.len())?;
    let mut x = x0;
    let ax = op.apply(&x)?;
    let mut r = rhs.clone();
    linalg::axpy(-1.0, &ax.values, &mut r.values);
    let mut z = precond.apply(&r)?;
    let mut rho = pairing(&z, &r)?;
    if rho < 0.0 {
        return Err(Error::Indefinite(format!("⟨B r, r⟩ = {rho:e} at start")));
    }
    let rho0 = rho;
    let mut history = vec![1.0];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut converged = rho0 == 0.0;
    let mut p = z.clone();

    while !converged && alphas.len() < opts.max_iter {
        let q = op.apply(&p)?;
        let curvature = pairing(&p, &q)?;
        if curvature <= 0.0 {
            return Err(Error::Indefinite(format!("⟨A p, p⟩ = {curvature:e}")));
        }
        let alpha = rho / curvature;
        linalg::axpy(alpha, &p.values, &mut x.values);
        linalg::axpy(-alpha, &q.values, &mut r.values);
        z = precond.apply(&r)?;
        let rho_new = pairing(&z, &r)?;
        if rho_new < 0.0 {
            return Err(Error::Indefinite(format!("⟨B r, r⟩ = {rho_new:e}")));
        }
        let rel = opts.measure.of(rho_new / rho0);
        history.push(rel);
        alphas.push(alpha);
        let beta = rho_new / rho;
        betas.push(beta);
        if rel <= opts.tol {
            converged = true;
            break;
        }
        for (pi, zi) in p.values.iter_mut().zip(&z.values) {
            *pi = zi + beta * *pi;
        }
        rho = rho_new;
    }

    let (lambda_min, lambda_max) = lanczos_extremes(&alphas, &betas)?;
    let report = SolveReport {
        iterations: alphas.len(),
        cond_estimate: (lambda_max / lambda_min).max(1.0),
        lambda_min,
        lambda_max,
        residual_history: history,
        converged,
    };
    Ok((x, report))
}

/// Dense matrix of a map, column by column on unit vectors.
pub fn materialize<R, M>(map: &M, space: Space, level: usize, dim: usize) -> Result<Mat<f64>>
where
    R: Representation,
    M: Operator<R> + ?Sized,
{
    let mut out = Mat::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let mut e = TaggedVector::<R>::zeros(space, level, dim);
        e.values[j] = 1.0;
        let col = map.apply(&e)?;
        col.expect(space, level, dim)?;
        for (i, v) in col.values.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// Eigenvalues of the pencil `(B, A)` of two symmetric maps with the same
/// orientation; `A` must be definite.
pub fn pencil_eigenvalues<R, MB, MA>(b: &MB, a: &MA, space: Space, level: usize, dim: usize) -> Result<Vec<f64>>
where
    R: Representation,
    MB: Operator<R> + ?Sized,
    MA: Operator<R> + ?Sized,
{
    let mut bm = materialize(b, space, level, dim)?;
    let mut am = materialize(a, space, level, dim)?;
    linalg::symmetrize(&mut bm);
    linalg::symmetrize(&mut am);
    spectral::generalized_eigenvalues(bm.as_ref(), am.as_ref()).map_err(|e| match e {
        Error::IndefiniteMass => Error::Indefinite("second map of the pencil".into()),
        other => other,
    })
}

/// `λ_max / λ_min` of the pencil `(B, A)`.
pub fn pencil_condition<R, MB, MA>(b: &MB, a: &MA, space: Space, level: usize, dim: usize) -> Result<f64>
where
    R: Representation,
    MB: Operator<R> + ?Sized,
    MA: Operator<R> + ?Sized,
{
    let ev = pencil_eigenvalues(b, a, space, level, dim)?;
    if ev[0] <= 0.0 {
        return Err(Error::Indefinite(format!("pencil eigenvalue {:e}", ev[0])));
    }
    Ok(ev[ev.len() - 1] / ev[0])
}
