//! Auxiliary-space preconditioner for negative fractional powers `A^s`,
//! `s ∈ [−1, 0]`, of the discrete Laplacian on piecewise constants.
//!
//! `B^s = Dᵀ Λ^{-(1+s)} D` maps `S` coefficients to `S` duals: the gradient
//! lifts into RT0, a fractional solve with `Λ` (exact or multigrid) acts
//! there, and the negative divergence brings the result back.

use faer::Mat;

use crate::amg::AdditiveMg;
use crate::exec::Execution;
use crate::fem::{CoeffVector, Coefficient, Discretization, Dual, DualVector, LevelMatrices, Space};
use crate::krylov::Operator;
use crate::linalg;
use crate::spectral::SpectralPair;
use crate::{Error, Result};

/// The `Λ` solve used inside the preconditioner.
#[derive(Debug, Clone)]
pub enum InnerSolver<'a> {
    /// `Φ_V diag(μ^{-(1+s)}) Φ_Vᵀ` from the `Λ` pencil of the level.
    Exact(&'a SpectralPair),
    /// Additive multigrid with exponent `1 + s`.
    Multigrid(AdditiveMg),
}

#[derive(Debug, Clone)]
pub struct AuxSpacePreconditioner<'a> {
    s: f64,
    level: &'a LevelMatrices,
    inner: InnerSolver<'a>,
}

fn check_exponent(s: f64) -> Result<()> {
    if !(-1.0..=0.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("auxiliary-space exponent {s} outside [-1, 0]")));
    }
    Ok(())
}

impl<'a> AuxSpacePreconditioner<'a> {
    /// Variant with the exact fractional `Λ` solve; `lambda` is the pencil of `level`.
    pub fn exact(level: &'a LevelMatrices, lambda: &'a SpectralPair, s: f64) -> Result<Self> {
        check_exponent(s)?;
        if lambda.dim() != level.dim_v() {
            return Err(Error::Dimension {
                space: Space::RaviartThomas,
                level: level.level,
                expected: level.dim_v(),
                found: lambda.dim(),
            });
        }
        Ok(Self { s, level, inner: InnerSolver::Exact(lambda) })
    }

    /// Variant with the additive multigrid `Λ` solve on the finest level of `disc`.
    pub fn multigrid(disc: &'a Discretization, s: f64, exec: Execution) -> Result<Self> {
        check_exponent(s)?;
        let mg = AdditiveMg::setup(disc, 1.0 + s, exec)?;
        Ok(Self { s, level: disc.finest(), inner: InnerSolver::Multigrid(mg) })
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn inner(&self) -> &InnerSolver<'a> {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.level.dim_s()
    }

    pub fn apply(&self, u: &CoeffVector) -> Result<DualVector> {
        let d = self.level.apply_d(u)?;
        let x = match &self.inner {
            InnerSolver::Exact(pair) => pair.frac_apply(1.0 + self.s, &d)?,
            InnerSolver::Multigrid(mg) => mg.apply(&d)?,
        };
        self.level.apply_d_transpose(&x)
    }
}

impl Operator<Coefficient> for AuxSpacePreconditioner<'_> {
    fn apply(&self, x: &CoeffVector) -> Result<DualVector> {
        AuxSpacePreconditioner::apply(self, x)
    }
}

/// `A^s` on `S` for `s ∈ [−1, 0]`, realized from dual to coefficient as
/// `Φ_A diag(a^s) Φ_Aᵀ`: the operator of the negative-order systems.
#[derive(Debug, Clone, Copy)]
pub struct FractionalLaplacian<'a> {
    pair: &'a SpectralPair,
    s: f64,
}

impl<'a> FractionalLaplacian<'a> {
    /// `pair` is the Laplacian pencil `(Dᵀ M_V⁻¹ D, M_S)`.
    pub fn new(pair: &'a SpectralPair, s: f64) -> Result<Self> {
        check_exponent(s)?;
        Ok(Self { pair, s })
    }
}

impl Operator<Dual> for FractionalLaplacian<'_> {
    fn apply(&self, x: &DualVector) -> Result<CoeffVector> {
        self.pair.frac_apply(-self.s, x)
    }
}

/// Precomputed spectral data of the exact auxiliary-space pencil on one level.
///
/// In the `A`-eigenbasis the pencil `(Dᵀ Λ^{-(1+s)} D, A^{-s} form)` becomes
/// `diag(a^{s/2}) Zᵀ diag(μ^{-(1+s)}) Z diag(a^{s/2})` with `Z = Φ_Vᵀ D Φ_A`.
#[derive(Debug, Clone)]
pub struct AuxSpectrum {
    z: Mat<f64>,
    mu: Vec<f64>,
    a: Vec<f64>,
}

impl AuxSpectrum {
    /// `lambda` and `laplacian` are the `Λ` and Laplacian pencils of `level`.
    pub fn new(level: &LevelMatrices, lambda: &SpectralPair, laplacian: &SpectralPair) -> Result<Self> {
        if lambda.dim() != level.dim_v() || laplacian.dim() != level.dim_s() {
            return Err(Error::InvalidArgument("spectral pairs do not belong to this level".into()));
        }
        let d = linalg::to_dense(&level.grad);
        let d_phi = d * laplacian.vectors();
        let z = lambda.vectors().transpose() * &d_phi;
        Ok(Self { z, mu: lambda.eigenvalues().to_vec(), a: laplacian.eigenvalues().to_vec() })
    }

    /// Pencil eigenvalues at exponent `s`, ascending.
    pub fn eigenvalues(&self, s: f64) -> Result<Vec<f64>> {
        check_exponent(s)?;
        let y = Mat::from_fn(self.z.nrows(), self.z.ncols(), |i, j| {
            self.z[(i, j)] * self.mu[i].powf(-(1.0 + s) / 2.0) * self.a[j].powf(s / 2.0)
        });
        let mut h = y.transpose() * &y;
        linalg::symmetrize(&mut h);
        linalg::symmetric_eigenvalues(h.as_ref())
    }

    pub fn condition(&self, s: f64) -> Result<f64> {
        let ev = self.eigenvalues(s)?;
        if ev[0] <= 0.0 {
            return Err(Error::Indefinite(format!("auxiliary pencil eigenvalue {:e}", ev[0])));
        }
        Ok(ev[ev.len() - 1] / ev[0])
    }

    /// `β²`: the smallest eigenvalue of `(Dᵀ Λ⁻¹ D, M_S)`.
    pub fn beta_squared(&self) -> Result<f64> {
        Ok(self.eigenvalues(0.0)?[0])
    }
}

/// Condition number of the exact auxiliary-space preconditioner against
/// `A^s` on one level.
pub fn exact_condition(s: f64, level: &LevelMatrices) -> Result<f64> {
    check_exponent(s)?;
    let lambda = crate::spectral::lambda_pair(level)?;
    let laplacian = crate::spectral::laplacian_pair(level)?;
    AuxSpectrum::new(level, &lambda, &laplacian)?.condition(s)
}
