//! Additive multigrid preconditioner for fractional powers `Λ^s`, `s ∈ [0, 1]`,
//! of the `H(div)` inner-product operator on RT0.
//!
//! The preconditioner is `Σ_k R^s_k Q_k`: the dual residual is restricted to
//! every level by the transposed prolongations, smoothed there, and the
//! corrections are prolongated back and summed. On the coarsest level
//! `R^s = Λ^{-s}` exactly; on every finer level `R^s` is the additive Schwarz
//! sum of exact fractional solves on vertex patches. No fractional power of a
//! fine-level operator is ever formed.

use faer::Mat;

use crate::exec::Execution;
use crate::fem::{CoeffVector, Discretization, DualVector, Space};
use crate::krylov::Operator;
use crate::linalg::{self, SparseMatrix};
use crate::mesh::VertexPatch;
use crate::spectral::{self, SpectralPair};
use crate::{Error, Result};

/// Exact fractional solve on the RT0 functions supported in one vertex star.
#[derive(Debug, Clone)]
pub struct PatchSolver {
    pub level: usize,
    pub vertex: usize,
    pub dofs: Vec<usize>,
    /// Pencil of the global `Λ` and `M_V` restricted to `dofs`.
    pub pair: SpectralPair,
    /// `Φ diag(λ^{-s}) Φᵀ`.
    local_inverse: Mat<f64>,
}

impl PatchSolver {
    fn new(disc: &Discretization, patch: &VertexPatch, s: f64) -> Result<Self> {
        let mats = &disc.levels[patch.level];
        let lambda = linalg::sparse_submatrix(&mats.lambda, &patch.edges);
        let mass = linalg::sparse_submatrix(&mats.mass_v, &patch.edges);
        let pair = spectral::generalized_eig(lambda.as_ref(), mass.as_ref())?;
        let local_inverse = pair.frac_matrix(s);
        Ok(Self { level: patch.level, vertex: patch.vertex, dofs: patch.edges.clone(), pair, local_inverse })
    }

    fn solve(&self, d: &[f64]) -> Vec<f64> {
        let local: Vec<f64> = self.dofs.iter().map(|&i| d[i]).collect();
        linalg::gemv(self.local_inverse.as_ref(), &local)
    }
}

#[derive(Debug, Clone)]
pub struct AdditiveMg {
    s: f64,
    coarse: SpectralPair,
    /// Patch solvers of levels `1..J`; entry `k - 1` belongs to level `k`.
    smoothers: Vec<Vec<PatchSolver>>,
    /// `prolongations[k]` maps level `k` into `k + 1`.
    prolongations: Vec<SparseMatrix>,
    dims: Vec<usize>,
    exec: Execution,
}

impl AdditiveMg {
    pub fn setup(disc: &Discretization, s: f64, exec: Execution) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!("multigrid exponent {s} outside [0, 1]")));
        }
        let coarse_mats = &disc.levels[0];
        let coarse =
            spectral::generalized_eig(coarse_mats.lambda_dense().as_ref(), coarse_mats.mass_v_dense().as_ref())?;
        let mut smoothers = Vec::with_capacity(disc.num_levels().saturating_sub(1));
        for k in 1..disc.num_levels() {
            let patches = disc.hierarchy.vertex_patches(k)?;
            let solvers = exec.map(&patches, |p| PatchSolver::new(disc, p, s));
            smoothers.push(solvers.into_iter().collect::<Result<Vec<_>>>()?);
        }
        Ok(Self {
            s,
            coarse,
            smoothers,
            prolongations: disc.prolongations.iter().map(|p| p.v.clone()).collect(),
            dims: disc.levels.iter().map(|l| l.dim_v()).collect(),
            exec,
        })
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn num_levels(&self) -> usize {
        self.dims.len()
    }

    pub fn finest_level(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dims[self.finest_level()]
    }

    pub fn patches(&self, level: usize) -> &[PatchSolver] {
        if level == 0 {
            &[]
        } else {
            &self.smoothers[level - 1]
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// The level smoother `R^s_k` on a raw dual vector of level `k`.
    pub fn apply_level(&self, level: usize, d: &[f64]) -> Vec<f64> {
        assert_eq!(d.len(), self.dims[level], "level {level} smoother: dimension mismatch");
        if level == 0 {
            return self.coarse.frac_apply_raw(self.s, d);
        }
        let patches = &self.smoothers[level - 1];
        let local = self.exec.map(patches, |p| p.solve(d));
        let mut out = vec![0.0; d.len()];
        for (p, x) in patches.iter().zip(local) {
            for (&i, v) in p.dofs.iter().zip(x) {
                out[i] += v;
            }
        }
        out
    }

    /// Applies the preconditioner to a raw dual vector of the finest level.
    pub fn apply_raw(&self, d: &[f64]) -> Vec<f64> {
        let top = self.finest_level();
        let mut duals = vec![Vec::new(); top + 1];
        duals[top] = d.to_vec();
        for k in (0..top).rev() {
            duals[k] = linalg::spmv_transpose(&self.prolongations[k], &duals[k + 1]);
        }
        let mut x = self.apply_level(0, &duals[0]);
        for k in 1..=top {
            let mut fine = linalg::spmv(&self.prolongations[k - 1], &x);
            linalg::axpy(1.0, &self.apply_level(k, &duals[k]), &mut fine);
            x = fine;
        }
        x
    }

    pub fn apply(&self, d: &DualVector) -> Result<CoeffVector> {
        d.expect(Space::RaviartThomas, self.finest_level(), self.dim())?;
        Ok(d.with_values(self.apply_raw(&d.values)))
    }
}

impl Operator<crate::fem::Dual> for AdditiveMg {
    fn apply(&self, x: &DualVector) -> Result<CoeffVector> {
        AdditiveMg::apply(self, x)
    }
}
