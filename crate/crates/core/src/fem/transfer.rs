use std::collections::BTreeMap;

use super::assembly::rt0_value;
use crate::linalg::{self, SparseMatrix};
use crate::mesh::MeshHierarchy;

/// Embeddings of level `k` spaces into level `k + 1`.
#[derive(Debug, Clone)]
pub struct Prolongation {
    pub coarse_level: usize,
    /// `N_{V,k+1} × N_{V,k}`: fine RT0 coefficients of each coarse basis function.
    pub v: SparseMatrix,
    /// `N_{S,k+1} × N_{S,k}`: each child triangle copies its parent's value.
    pub s: SparseMatrix,
}

impl Prolongation {
    /// Coefficients are fluxes of the coarse basis functions through the fine
    /// edges. The normal component of an RT0 field is constant along a straight
    /// edge, so the midpoint value times the length is exact.
    pub fn assemble(hierarchy: &MeshHierarchy, coarse_level: usize) -> Self {
        let coarse = hierarchy.level(coarse_level);
        let fine = hierarchy.level(coarse_level + 1);
        let children = &hierarchy.children[coarse_level];

        // Fine edges on a coarse edge are reached from both neighbouring coarse
        // triangles; normal continuity makes both values equal, so keep one.
        let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut s_entries = Vec::with_capacity(fine.num_triangles());
        for (tc, kids) in children.triangle_children.iter().enumerate() {
            for &tf in kids {
                s_entries.push((tf, tc, 1.0));
                for &ef in &fine.triangle_edges[tf] {
                    let mid = fine.edge_midpoint(ef);
                    let nrm = fine.edge_normal(ef);
                    let len = fine.edge_length(ef);
                    for &ec in &coarse.triangle_edges[tc] {
                        let v = rt0_value(coarse, tc, ec, mid);
                        let flux = (v[0] * nrm[0] + v[1] * nrm[1]) * len;
                        if flux.abs() > 1e-12 {
                            entries.insert((ef, ec), flux);
                        }
                    }
                }
            }
        }
        let triplets: Vec<_> = entries.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        Self {
            coarse_level,
            v: linalg::sparse_from_triplets(fine.num_edges(), coarse.num_edges(), &triplets),
            s: linalg::sparse_from_triplets(fine.num_triangles(), coarse.num_triangles(), &s_entries),
        }
    }

    /// Coarse `V` coefficients to fine `V` coefficients.
    pub fn prolong_v(&self, x: &[f64]) -> Vec<f64> {
        linalg::spmv(&self.v, x)
    }

    /// Fine `V` duals to coarse `V` duals (the dual form of the L² projection).
    pub fn restrict_v(&self, d: &[f64]) -> Vec<f64> {
        linalg::spmv_transpose(&self.v, d)
    }
}
