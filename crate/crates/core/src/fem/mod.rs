//! Finite element spaces on one level of the hierarchy and the vectors that
//! live in them.
//!
//! Three spaces appear: piecewise constants `S`, lowest-order Raviart-Thomas
//! `V` (one normal-flux degree of freedom per edge) and continuous piecewise
//! linears `C`, whose curls span the divergence-free part of `V`.
//!
//! A function has two vector representations: its basis coefficients, and
//! its *dual* vector of inner products against the basis. Matrices that come
//! out of assembly take coefficients to duals; solves and preconditioners go
//! the other way. [`TaggedVector`] carries the representation as a type
//! parameter and the space and level as runtime tags.

mod assembly;
mod helmholtz;
mod transfer;

use std::fmt;
use std::marker::PhantomData;

pub use assembly::{write_coo, LevelMatrices};
pub use helmholtz::{helmholtz_decompose, HelmholtzParts};
pub use transfer::Prolongation;

use crate::exec::Execution;
use crate::mesh::MeshHierarchy;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    /// Discontinuous piecewise constants, one value per triangle.
    PiecewiseConstant,
    /// Lowest-order Raviart-Thomas, one flux per edge.
    RaviartThomas,
    /// Continuous piecewise linears, one value per vertex.
    Lagrange,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::PiecewiseConstant => "S",
            Space::RaviartThomas => "V",
            Space::Lagrange => "C",
        })
    }
}

/// Marker for a vector representation. Each representation has a dual, and
/// the dual of the dual is the original.
pub trait Representation: Copy + Default + fmt::Debug + Send + Sync + 'static {
    type Dual: Representation<Dual = Self>;
    const NAME: &'static str;
}

/// Basis coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Coefficient;

/// Inner products against the basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dual;

impl Representation for Coefficient {
    type Dual = Dual;
    const NAME: &'static str = "coefficient";
}

impl Representation for Dual {
    type Dual = Coefficient;
    const NAME: &'static str = "dual";
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedVector<R> {
    pub space: Space,
    pub level: usize,
    pub values: Vec<f64>,
    rep: PhantomData<R>,
}

pub type CoeffVector = TaggedVector<Coefficient>;
pub type DualVector = TaggedVector<Dual>;

impl<R: Representation> TaggedVector<R> {
    pub fn new(space: Space, level: usize, values: Vec<f64>) -> Self {
        Self { space, level, values, rep: PhantomData }
    }

    pub fn zeros(space: Space, level: usize, dim: usize) -> Self {
        Self::new(space, level, vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tag(&self) -> String {
        format!("({}, level {}, {})", self.space, self.level, R::NAME)
    }

    /// Checks space, level and dimension against what an operator expects.
    pub fn expect(&self, space: Space, level: usize, dim: usize) -> Result<()> {
        if self.space != space || self.level != level {
            return Err(Error::TagMismatch {
                expected: format!("({space}, level {level}, {})", R::NAME),
                found: self.tag(),
            });
        }
        if self.values.len() != dim {
            return Err(Error::Dimension { space, level, expected: dim, found: self.values.len() });
        }
        Ok(())
    }

    /// Same tags, new values, possibly in the dual representation.
    pub fn with_values<Q: Representation>(&self, values: Vec<f64>) -> TaggedVector<Q> {
        TaggedVector::new(self.space, self.level, values)
    }
}

/// The duality pairing `⟨x, y⟩` between a vector and one in the dual
/// representation of the same space and level.
pub fn pairing<R: Representation>(x: &TaggedVector<R>, y: &TaggedVector<R::Dual>) -> Result<f64> {
    y.expect(x.space, x.level, x.len())?;
    Ok(crate::linalg::dot(&x.values, &y.values))
}

/// Dimension of `space` on a mesh with `n` cells per side.
pub fn space_dim(space: Space, n: usize) -> usize {
    match space {
        Space::PiecewiseConstant => 2 * n * n,
        Space::RaviartThomas => 3 * n * n + 2 * n,
        Space::Lagrange => (n + 1) * (n + 1),
    }
}

/// A mesh hierarchy with assembled matrices on every level and the
/// prolongations between consecutive levels.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub hierarchy: MeshHierarchy,
    pub levels: Vec<LevelMatrices>,
    /// `prolongations[k]` maps level `k` into level `k + 1`.
    pub prolongations: Vec<Prolongation>,
}

impl Discretization {
    pub fn new(n0: usize, num_levels: usize, exec: Execution) -> Result<Self> {
        let hierarchy = MeshHierarchy::build(n0, num_levels)?;
        let levels = exec.map_range(num_levels, |k| LevelMatrices::assemble(hierarchy.level(k), k));
        let prolongations = exec.map_range(num_levels - 1, |k| Prolongation::assemble(&hierarchy, k));
        Ok(Self { hierarchy, levels, prolongations })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &LevelMatrices {
        self.levels.last().expect("at least one level")
    }

    pub fn finest_level(&self) -> usize {
        self.levels.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_are_checked() {
        let c = CoeffVector::new(Space::RaviartThomas, 1, vec![1.0, 2.0]);
        let d = DualVector::new(Space::RaviartThomas, 1, vec![3.0, -1.0]);
        assert_eq!(pairing(&c, &d).unwrap(), 1.0);
        assert_eq!(pairing(&d, &c).unwrap(), 1.0);
        let wrong_space = DualVector::new(Space::PiecewiseConstant, 1, vec![3.0, -1.0]);
        assert!(matches!(pairing(&c, &wrong_space), Err(Error::TagMismatch { .. })));
        let wrong_level = DualVector::new(Space::RaviartThomas, 0, vec![3.0, -1.0]);
        assert!(matches!(pairing(&c, &wrong_level), Err(Error::TagMismatch { .. })));
        let wrong_len = DualVector::new(Space::RaviartThomas, 1, vec![3.0]);
        assert!(matches!(pairing(&c, &wrong_len), Err(Error::Dimension { .. })));
    }

    #[test]
    fn dimensions() {
        assert_eq!(space_dim(Space::RaviartThomas, 8), 208);
        assert_eq!(space_dim(Space::PiecewiseConstant, 8), 128);
        assert_eq!(space_dim(Space::Lagrange, 8), 81);
    }
}
