use std::io::Write;

use faer::Mat;

use super::{CoeffVector, DualVector, Space};
use crate::linalg::{self, SparseMatrix};
use crate::mesh::MeshLevel;
use crate::Result;

/// Value at `x` of the RT0 basis function of edge `e`, restricted to triangle `t`.
///
/// `ψ_e(x) = σ (x - p) / (2|T|)` with `p` the vertex opposite `e` and `σ = ±1`
/// the agreement of the global edge normal with the outward normal of `t`;
/// its flux through `e` along the global normal is 1.
pub(crate) fn rt0_value(mesh: &MeshLevel, t: usize, e: usize, x: [f64; 2]) -> [f64; 2] {
    let l = mesh.triangle_edges[t].iter().position(|&k| k == e).expect("edge not in triangle");
    let p = mesh.vertices[mesh.triangles[t][l]];
    let c = mesh.edge_sign(t, e) / (2.0 * mesh.signed_area(t));
    [c * (x[0] - p[0]), c * (x[1] - p[1])]
}

/// Gradients of the three P1 hat functions of triangle `t`, in local vertex order.
fn p1_gradients(mesh: &MeshLevel, t: usize) -> [[f64; 2]; 3] {
    let v = mesh.triangles[t].map(|i| mesh.vertices[i]);
    let two_area = 2.0 * mesh.signed_area(t);
    std::array::from_fn(|l| {
        let (a, b) = (v[(l + 1) % 3], v[(l + 2) % 3]);
        [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area]
    })
}

/// All matrices of one level.
#[derive(Debug, Clone)]
pub struct LevelMatrices {
    pub level: usize,
    pub n: usize,
    /// Diagonal of the `S` mass matrix (triangle areas).
    pub mass_s: Vec<f64>,
    pub mass_v: SparseMatrix,
    /// `⟨div ψ_j, div ψ_i⟩`.
    pub divdiv: SparseMatrix,
    /// `H(div)` inner product, `mass_v + divdiv`.
    pub lambda: SparseMatrix,
    /// `D[i][j] = -⟨φ_j, div ψ_i⟩`; maps `S` coefficients to `V` duals.
    pub grad: SparseMatrix,
    /// `K[i][j] = ⟨curl q_j, ψ_i⟩` with `curl q = (∂q/∂y, -∂q/∂x)`; maps `C`
    /// coefficients to `V` duals.
    pub curl: SparseMatrix,
    /// RT0 coefficients of `curl q_j`: the flux of `curl q` through an edge
    /// `a → b` is `q(b) - q(a)`.
    pub curl_coefficients: SparseMatrix,
}

impl LevelMatrices {
    pub fn assemble(mesh: &MeshLevel, level: usize) -> Self {
        let (ns, nv, nc) = (mesh.num_triangles(), mesh.num_edges(), mesh.num_vertices());
        let mut mass = Vec::with_capacity(9 * ns);
        let mut divdiv = Vec::with_capacity(9 * ns);
        let mut grad = Vec::with_capacity(3 * ns);
        let mut curl = Vec::with_capacity(9 * ns);
        let mut mass_s = Vec::with_capacity(ns);

        for t in 0..ns {
            let area = mesh.signed_area(t);
            mass_s.push(area);
            let edges = mesh.triangle_edges[t];
            let signs = edges.map(|e| mesh.edge_sign(t, e));

            // Edge midpoints: a three-point rule exact for quadratics.
            let qp: [[f64; 2]; 3] = std::array::from_fn(|l| mesh.edge_midpoint(edges[l]));
            let vals: [[[f64; 2]; 3]; 3] =
                std::array::from_fn(|a| std::array::from_fn(|q| rt0_value(mesh, t, edges[a], qp[q])));
            for a in 0..3 {
                for b in 0..3 {
                    let m: f64 =
                        (0..3).map(|q| vals[a][q][0] * vals[b][q][0] + vals[a][q][1] * vals[b][q][1]).sum::<f64>()
                            * area
                            / 3.0;
                    mass.push((edges[a], edges[b], m));
                    // div ψ = σ / |T| is constant on the triangle.
                    divdiv.push((edges[a], edges[b], signs[a] * signs[b] / area));
                }
                grad.push((edges[a], t, -signs[a]));
            }

            // curl q_j is constant on T, and ∫_T ψ_i = σ (centroid - p) / 2.
            let gq = p1_gradients(mesh, t);
            let verts = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let centroid =
                [(verts[0][0] + verts[1][0] + verts[2][0]) / 3.0, (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0];
            for a in 0..3 {
                let p = verts[a];
                let int_psi = [0.5 * signs[a] * (centroid[0] - p[0]), 0.5 * signs[a] * (centroid[1] - p[1])];
                for (j, g) in gq.iter().enumerate() {
                    let curl_q = [g[1], -g[0]];
                    curl.push((edges[a], mesh.triangles[t][j], int_psi[0] * curl_q[0] + int_psi[1] * curl_q[1]));
                }
            }
        }

        let curl_coefficients: Vec<(usize, usize, f64)> =
            mesh.edges.iter().enumerate().flat_map(|(e, &[a, b])| [(e, b, 1.0), (e, a, -1.0)]).collect();

        let lambda: Vec<_> = mass.iter().chain(divdiv.iter()).copied().collect();
        Self {
            level,
            n: mesh.n,
            mass_s,
            mass_v: linalg::sparse_from_triplets(nv, nv, &mass),
            divdiv: linalg::sparse_from_triplets(nv, nv, &divdiv),
            lambda: linalg::sparse_from_triplets(nv, nv, &lambda),
            grad: linalg::sparse_from_triplets(nv, ns, &grad),
            curl: linalg::sparse_from_triplets(nv, nc, &curl),
            curl_coefficients: linalg::sparse_from_triplets(nv, nc, &curl_coefficients),
        }
    }

    pub fn dim_s(&self) -> usize {
        self.mass_s.len()
    }

    pub fn dim_v(&self) -> usize {
        self.mass_v.nrows()
    }

    pub fn dim_c(&self) -> usize {
        self.curl.ncols()
    }

    pub fn dim(&self, space: Space) -> usize {
        match space {
            Space::PiecewiseConstant => self.dim_s(),
            Space::RaviartThomas => self.dim_v(),
            Space::Lagrange => self.dim_c(),
        }
    }

    /// Discrete gradient: `S` coefficients to `V` duals.
    pub fn apply_d(&self, u: &CoeffVector) -> Result<DualVector> {
        u.expect(Space::PiecewiseConstant, self.level, self.dim_s())?;
        Ok(DualVector::new(Space::RaviartThomas, self.level, linalg::spmv(&self.grad, &u.values)))
    }

    /// Negative divergence: `V` coefficients to `S` duals.
    pub fn apply_d_transpose(&self, tau: &CoeffVector) -> Result<DualVector> {
        tau.expect(Space::RaviartThomas, self.level, self.dim_v())?;
        Ok(DualVector::new(Space::PiecewiseConstant, self.level, linalg::spmv_transpose(&self.grad, &tau.values)))
    }

    pub fn mass_s_dense(&self) -> Mat<f64> {
        let n = self.dim_s();
        Mat::from_fn(n, n, |i, j| if i == j { self.mass_s[i] } else { 0.0 })
    }

    pub fn mass_v_dense(&self) -> Mat<f64> {
        linalg::to_dense(&self.mass_v)
    }

    pub fn lambda_dense(&self) -> Mat<f64> {
        linalg::to_dense(&self.lambda)
    }

    /// Dense `Dᵀ M_V⁻¹ D`: the discrete Laplacian on `S` as a coefficient-to-dual matrix.
    pub fn laplacian_dense(&self) -> Result<Mat<f64>> {
        let d = linalg::to_dense(&self.grad);
        let minv_d = linalg::spd_solve(self.mass_v_dense().as_ref(), d.as_ref())?;
        let mut a = d.transpose() * &minv_d;
        linalg::symmetrize(&mut a);
        Ok(a)
    }
}

/// Writes a sparse matrix as `row col value` lines.
pub fn write_coo<W: Write>(m: &SparseMatrix, mut w: W) -> std::io::Result<()> {
    let (ptr, idx, val) = (m.symbolic().row_ptr(), m.symbolic().col_idx(), m.val());
    writeln!(w, "% {} {} {}", m.nrows(), m.ncols(), val.len())?;
    for i in 0..m.nrows() {
        for p in ptr[i]..ptr[i + 1] {
            writeln!(w, "{} {} {:.17e}", i, idx[p], val[p])?;
        }
    }
    Ok(())
}
