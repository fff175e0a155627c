//! Nested uniform triangulations of the unit square.
//!
//! Level `k` (0-based, coarsest first) has `n0 · 2^k` cells per side. Every
//! square cell `(i, j)` is split by its lower-left to upper-right diagonal into
//! a lower triangle `(v00, v10, v11)` and an upper triangle `(v00, v11, v01)`,
//! both counterclockwise. Red refinement of this pattern reproduces the same
//! pattern at twice the resolution, so each level is generated directly and the
//! parent/child maps are recovered from integer coordinates.

use std::collections::HashMap;
use std::io::Write;

use crate::{Error, Result};

/// One uniform triangulation of `[0, 1]²`.
#[derive(Debug, Clone)]
pub struct MeshLevel {
    /// Cells per side.
    pub n: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Vertex pairs `(a, b)` with `a < b`; the edge is oriented from `a` to `b`.
    pub edges: Vec<[usize; 2]>,
    /// One or two adjacent triangles per edge, in ascending order.
    pub edge_to_triangles: Vec<Vec<usize>>,
    /// `triangle_edges[t][l]` is the edge opposite local vertex `l`.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Edges incident to each vertex, ascending.
    pub vertex_edges: Vec<Vec<usize>>,
    /// Triangles containing each vertex, ascending.
    pub vertex_triangles: Vec<Vec<usize>>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl MeshLevel {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("cells per side must be at least 1".into()));
        }
        let np = n + 1;
        let vertices = (0..np * np)
            .map(|v| {
                let (i, j) = (v % np, v / np);
                [i as f64 / n as f64, j as f64 / n as f64]
            })
            .collect();

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * np + i;
                let v10 = v00 + 1;
                let v01 = v00 + np;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let mut edges: Vec<[usize; 2]> = triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |l| {
                    let (a, b) = (t[(l + 1) % 3], t[(l + 2) % 3]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let edge_index: HashMap<(usize, usize), usize> =
            edges.iter().enumerate().map(|(e, &[a, b])| ((a, b), e)).collect();

        let mut edge_to_triangles = vec![Vec::with_capacity(2); edges.len()];
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut vertex_triangles = vec![Vec::new(); np * np];
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for l in 0..3 {
                let (a, b) = (tri[(l + 1) % 3], tri[(l + 2) % 3]);
                let e = edge_index[&(a.min(b), a.max(b))];
                te[l] = e;
                edge_to_triangles[e].push(t);
                vertex_triangles[tri[l]].push(t);
            }
            triangle_edges.push(te);
        }
        let mut vertex_edges = vec![Vec::new(); np * np];
        for (e, &[a, b]) in edges.iter().enumerate() {
            vertex_edges[a].push(e);
            vertex_edges[b].push(e);
        }

        Ok(Self {
            n,
            vertices,
            triangles,
            edges,
            edge_to_triangles,
            triangle_edges,
            vertex_edges,
            vertex_triangles,
            edge_index,
        })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Integer grid coordinates of a vertex.
    pub fn grid_coords(&self, v: usize) -> (usize, usize) {
        (v % (self.n + 1), v / (self.n + 1))
    }

    pub fn vertex_at(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    /// Index of the edge joining `a` and `b`, in either order.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_to_triangles[e].len() == 1
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].map(|v| self.vertices[v]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].map(|v| self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Unit normal of edge `e`: its tangent `b - a` rotated clockwise.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].map(|v| self.vertices[v]);
        let len = self.edge_length(e);
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    /// `+1` if the normal of edge `e` points out of triangle `t`, `-1` otherwise.
    pub fn edge_sign(&self, t: usize, e: usize) -> f64 {
        let tri = self.triangles[t];
        let l = self.triangle_edges[t].iter().position(|&x| x == e).expect("edge does not belong to triangle");
        let p = self.vertices[tri[l]];
        let m = self.edge_midpoint(e);
        let nrm = self.edge_normal(e);
        if (m[0] - p[0]) * nrm[0] + (m[1] - p[1]) * nrm[1] > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Plain-text listing of vertices, triangles and edges.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# mesh n={} h={}", self.n, self.h())?;
        writeln!(w, "vertices {}", self.num_vertices())?;
        for (v, p) in self.vertices.iter().enumerate() {
            writeln!(w, "{v} {} {}", p[0], p[1])?;
        }
        writeln!(w, "triangles {}", self.num_triangles())?;
        for (t, tri) in self.triangles.iter().enumerate() {
            writeln!(w, "{t} {} {} {}", tri[0], tri[1], tri[2])?;
        }
        writeln!(w, "edges {}", self.num_edges())?;
        for (e, ed) in self.edges.iter().enumerate() {
            let adj: Vec<String> = self.edge_to_triangles[e].iter().map(|t| t.to_string()).collect();
            writeln!(w, "{e} {} {} {}", ed[0], ed[1], adj.join(" "))?;
        }
        Ok(())
    }
}

/// The star of a vertex: the triangles meeting at it and the edges incident
/// to it (the RT0 functions supported in the closed star).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexPatch {
    pub level: usize,
    pub vertex: usize,
    pub triangles: Vec<usize>,
    pub edges: Vec<usize>,
}

/// Coarse-to-fine incidence between two consecutive levels.
#[derive(Debug, Clone)]
pub struct ChildMap {
    /// Four fine triangles per coarse triangle.
    pub triangle_children: Vec<[usize; 4]>,
    /// Two fine edges per coarse edge, the first touching the coarse edge's first vertex.
    pub edge_children: Vec<[usize; 2]>,
    /// Fine vertex at the midpoint of each coarse edge.
    pub edge_midpoints: Vec<usize>,
}

/// Levels `T_1 ⊂ … ⊂ T_J`, stored 0-based and coarsest first.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<MeshLevel>,
    /// `children[k]` links level `k` to level `k + 1`.
    pub children: Vec<ChildMap>,
}

impl MeshHierarchy {
    pub fn build(n0: usize, num_levels: usize) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::InvalidArgument("coarsest cells per side must be at least 1".into()));
        }
        if num_levels == 0 {
            return Err(Error::InvalidArgument("level count must be at least 1".into()));
        }
        let levels = (0..num_levels).map(|k| MeshLevel::uniform(n0 << k)).collect::<Result<Vec<_>>>()?;
        let children = levels.windows(2).map(|w| child_map(&w[0], &w[1])).collect();
        Ok(Self { levels, children })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &MeshLevel {
        &self.levels[k]
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("hierarchy has at least one level")
    }

    /// One patch per vertex of level `k`, in ascending vertex order.
    ///
    /// The multigrid preconditioner uses patches on every level but the
    /// coarsest; they are well defined on any level, so `k = 0` is accepted.
    pub fn vertex_patches(&self, k: usize) -> Result<Vec<VertexPatch>> {
        let mesh = self.levels.get(k).ok_or_else(|| {
            Error::InvalidArgument(format!("level {k} out of range (hierarchy has {})", self.num_levels()))
        })?;
        Ok((0..mesh.num_vertices())
            .map(|v| VertexPatch {
                level: k,
                vertex: v,
                triangles: mesh.vertex_triangles[v].clone(),
                edges: mesh.vertex_edges[v].clone(),
            })
            .collect())
    }
}

fn child_map(coarse: &MeshLevel, fine: &MeshLevel) -> ChildMap {
    debug_assert_eq!(fine.n, 2 * coarse.n);
    let nc = coarse.n;

    let mut triangle_children = vec![[usize::MAX; 4]; coarse.num_triangles()];
    let mut filled = vec![0usize; coarse.num_triangles()];
    for (t, tri) in fine.triangles.iter().enumerate() {
        // Three times the centroid, in fine grid units; a coarse cell spans 6 of them.
        let (sx, sy) = tri.iter().fold((0, 0), |(sx, sy), &v| {
            let (i, j) = fine.grid_coords(v);
            (sx + i, sy + j)
        });
        let (ci, cj) = (sx / 6, sy / 6);
        let upper = sy - 6 * cj > sx - 6 * ci;
        let parent = 2 * (cj * nc + ci) + usize::from(upper);
        triangle_children[parent][filled[parent]] = t;
        filled[parent] += 1;
    }
    debug_assert!(filled.iter().all(|&c| c == 4));

    let mut edge_children = Vec::with_capacity(coarse.num_edges());
    let mut edge_midpoints = Vec::with_capacity(coarse.num_edges());
    for &[a, b] in &coarse.edges {
        let (ai, aj) = coarse.grid_coords(a);
        let (bi, bj) = coarse.grid_coords(b);
        let fa = fine.vertex_at(2 * ai, 2 * aj);
        let fb = fine.vertex_at(2 * bi, 2 * bj);
        let m = fine.vertex_at(ai + bi, aj + bj);
        let e0 = fine.edge_between(fa, m).expect("fine half-edge missing");
        let e1 = fine.edge_between(m, fb).expect("fine half-edge missing");
        edge_children.push([e0, e1]);
        edge_midpoints.push(m);
    }

    ChildMap { triangle_children, edge_children, edge_midpoints }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_closed_forms() {
        for n in [1, 2, 3, 5, 8] {
            let m = MeshLevel::uniform(n).unwrap();
            assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
            assert_eq!(m.num_triangles(), 2 * n * n);
            assert_eq!(m.num_edges(), 3 * n * n + 2 * n);
            // Euler characteristic of the closed square.
            assert_eq!(m.num_vertices() + m.num_triangles() - m.num_edges(), 1);
            // Helmholtz dimension count: dim V = dim S + dim C - 1.
            assert_eq!(m.num_edges(), m.num_triangles() + m.num_vertices() - 1);
        }
    }

    #[test]
    fn single_cell_mesh() {
        let m = MeshLevel::uniform(1).unwrap();
        assert_eq!((m.num_triangles(), m.num_edges(), m.num_vertices()), (2, 5, 4));
    }

    #[test]
    fn areas_and_edge_adjacency() {
        let n = 4;
        let m = MeshLevel::uniform(n).unwrap();
        for t in 0..m.num_triangles() {
            assert!((m.signed_area(t) - 0.5 / (n * n) as f64).abs() < 1e-15);
        }
        for e in 0..m.num_edges() {
            let [a, b] = m.edges[e];
            assert!(a < b);
            let on_boundary = {
                let (p, q) = (m.vertices[a], m.vertices[b]);
                (p[0] == q[0] && (p[0] == 0.0 || p[0] == 1.0)) || (p[1] == q[1] && (p[1] == 0.0 || p[1] == 1.0))
            };
            assert_eq!(m.edge_to_triangles[e].len(), if on_boundary { 1 } else { 2 });
        }
    }

    #[test]
    fn edge_signs_are_opposite_across_interior_edges() {
        let m = MeshLevel::uniform(3).unwrap();
        for e in 0..m.num_edges() {
            let adj = &m.edge_to_triangles[e];
            if adj.len() == 2 {
                assert_eq!(m.edge_sign(adj[0], e), -m.edge_sign(adj[1], e));
            } else {
                // Boundary normals point out of the square.
                let mid = m.edge_midpoint(e);
                let nrm = m.edge_normal(e);
                let out = m.edge_sign(adj[0], e);
                let probe = [mid[0] + 1e-3 * out * nrm[0], mid[1] + 1e-3 * out * nrm[1]];
                assert!(probe.iter().any(|&c| !(0.0..=1.0).contains(&c)));
            }
        }
    }

    #[test]
    fn hierarchy_sizes() {
        let h = MeshHierarchy::build(1, 4).unwrap();
        assert_eq!(h.num_levels(), 4);
        assert_eq!(h.finest().num_edges(), 208);
        for (k, l) in h.levels.iter().enumerate() {
            assert_eq!(l.n, 1 << k);
        }
        let single = MeshHierarchy::build(8, 1).unwrap();
        assert_eq!(single.finest().num_triangles(), 128);
        assert!(MeshHierarchy::build(0, 2).is_err());
        assert!(MeshHierarchy::build(2, 0).is_err());
    }

    #[test]
    fn refinement_nesting() {
        let h = MeshHierarchy::build(2, 3).unwrap();
        for k in 0..2 {
            let (c, f, cm) = (&h.levels[k], &h.levels[k + 1], &h.children[k]);
            for (t, kids) in cm.triangle_children.iter().enumerate() {
                let area: f64 = kids.iter().map(|&k| f.signed_area(k)).sum();
                assert!((area - c.signed_area(t)).abs() < 1e-15);
                // Child centroids lie inside the parent.
                let par = c.triangles[t].map(|v| c.vertices[v]);
                for &kid in kids {
                    let cen = f.triangles[kid]
                        .iter()
                        .fold([0.0, 0.0], |acc, &v| [acc[0] + f.vertices[v][0] / 3.0, acc[1] + f.vertices[v][1] / 3.0]);
                    for l in 0..3 {
                        let (a, b) = (par[l], par[(l + 1) % 3]);
                        let cross = (b[0] - a[0]) * (cen[1] - a[1]) - (b[1] - a[1]) * (cen[0] - a[0]);
                        assert!(cross > 0.0);
                    }
                }
            }
            for (e, kids) in cm.edge_children.iter().enumerate() {
                let shared: Vec<usize> =
                    f.edges[kids[0]].iter().filter(|v| f.edges[kids[1]].contains(v)).copied().collect();
                assert_eq!(shared, vec![cm.edge_midpoints[e]]);
                let mid = c.edge_midpoint(e);
                assert_eq!(f.vertices[cm.edge_midpoints[e]], mid);
                let len: f64 = kids.iter().map(|&k| f.edge_length(k)).sum();
                assert!((len - c.edge_length(e)).abs() < 1e-15);
            }
            // Every fine vertex is a coarse vertex or a coarse edge midpoint.
            for v in 0..f.num_vertices() {
                let (i, j) = f.grid_coords(v);
                let is_coarse = i % 2 == 0 && j % 2 == 0;
                assert!(is_coarse || cm.edge_midpoints.contains(&v));
            }
        }
    }

    #[test]
    fn center_patch_is_a_full_star() {
        let h = MeshHierarchy::build(2, 1).unwrap();
        let patches = h.vertex_patches(0).unwrap();
        let center = h.level(0).vertex_at(1, 1);
        let p = &patches[center];
        // Brute force: triangles whose vertex list contains the center.
        let brute: Vec<usize> =
            h.level(0).triangles.iter().enumerate().filter(|(_, t)| t.contains(&center)).map(|(i, _)| i).collect();
        assert_eq!(p.triangles, brute);
        assert_eq!(p.triangles.len(), 6);
        assert_eq!(p.edges.len(), 6);
    }

    #[test]
    fn corner_patches() {
        let h = MeshHierarchy::build(1, 3).unwrap();
        for k in 0..3 {
            let m = h.level(k);
            let patches = h.vertex_patches(k).unwrap();
            // Corners away from the diagonal touch a single triangle.
            for (i, j) in [(m.n, 0), (0, m.n)] {
                let p = &patches[m.vertex_at(i, j)];
                assert_eq!((p.triangles.len(), p.edges.len()), (1, 2));
            }
            // Corners on the diagonal touch both halves of their cell.
            for (i, j) in [(0, 0), (m.n, m.n)] {
                let p = &patches[m.vertex_at(i, j)];
                assert_eq!((p.triangles.len(), p.edges.len()), (2, 3));
            }
        }
    }

    #[test]
    fn every_edge_lies_in_two_patches_inside_the_star() {
        let h = MeshHierarchy::build(1, 3).unwrap();
        for k in 0..3 {
            let m = h.level(k);
            let patches = h.vertex_patches(k).unwrap();
            let mut count = vec![0; m.num_edges()];
            for p in &patches {
                for &e in &p.edges {
                    count[e] += 1;
                    assert!(m.edge_to_triangles[e].iter().all(|t| p.triangles.contains(t)));
                }
            }
            assert!(count.iter().all(|&c| c == 2));
        }
        assert!(h.vertex_patches(3).is_err());
    }

    #[test]
    fn dump_lists_everything() {
        let m = MeshLevel::uniform(1).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("vertices 4"));
        assert!(text.contains("triangles 2"));
        assert!(text.contains("edges 5"));
    }
}
