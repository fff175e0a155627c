use approx::assert_relative_eq;
use fracprec::auxprec::AuxSpectrum;
use fracprec::fem::{pairing, CoeffVector, Discretization, DualVector, LevelMatrices, Space};
use fracprec::krylov::{pcg, PcgOptions};
use fracprec::linalg;
use fracprec::mesh::{MeshHierarchy, MeshLevel};
use fracprec::spectral;
use fracprec::{AdditiveMg, Execution};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_counts(n in 1usize..20) {
        let m = MeshLevel::uniform(n).unwrap();
        prop_assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
        prop_assert_eq!(m.num_triangles(), 2 * n * n);
        prop_assert_eq!(m.num_edges(), 3 * n * n + 2 * n);
        prop_assert_eq!(m.num_vertices() + m.num_triangles(), m.num_edges() + 1);
        let area: f64 = (0..m.num_triangles()).map(|t| m.signed_area(t)).sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn patches_cover_every_edge_twice(n0 in 1usize..3, levels in 1usize..4) {
        let h = MeshHierarchy::build(n0, levels).unwrap();
        let k = levels - 1;
        let mut hits = vec![0usize; h.level(k).num_edges()];
        for p in h.vertex_patches(k).unwrap() {
            for e in p.edges {
                hits[e] += 1;
            }
        }
        prop_assert!(hits.iter().all(|&c| c == 2));
    }

    #[test]
    fn fractional_round_trip(n in 1usize..4, s in 0.0f64..1.0, seed in any::<u64>()) {
        let lvl = LevelMatrices::assemble(&MeshLevel::uniform(n).unwrap(), 0);
        let pair = spectral::lambda_pair(&lvl).unwrap();
        let c = CoeffVector::new(Space::RaviartThomas, 0, random(lvl.dim_v(), seed));
        let back = pair.frac_apply(s, &pair.frac_apply_dualform(s, &c).unwrap()).unwrap();
        for (a, b) in back.values.iter().zip(&c.values) {
            assert_relative_eq!(*a, *b, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn fractional_forms_are_monotone_in_s(n in 1usize..4, s in 0.0f64..0.9, seed in any::<u64>()) {
        // Λ ≥ M, so the forms grow with the exponent.
        let lvl = LevelMatrices::assemble(&MeshLevel::uniform(n).unwrap(), 0);
        let pair = spectral::lambda_pair(&lvl).unwrap();
        let c = CoeffVector::new(Space::RaviartThomas, 0, random(lvl.dim_v(), seed));
        let lo = pairing(&c, &pair.frac_apply_dualform(s, &c).unwrap()).unwrap();
        let hi = pairing(&c, &pair.frac_apply_dualform(s + 0.1, &c).unwrap()).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn multigrid_is_symmetric_positive(s in 0.0f64..=1.0, seed in any::<u64>()) {
        let disc = Discretization::new(1, 3, Execution::Sequential).unwrap();
        let mg = AdditiveMg::setup(&disc, s, Execution::Sequential).unwrap();
        let n = disc.finest().dim_v();
        let d1 = DualVector::new(Space::RaviartThomas, 2, random(n, seed));
        let d2 = DualVector::new(Space::RaviartThomas, 2, random(n, seed.wrapping_add(1)));
        let a = pairing(&mg.apply(&d1).unwrap(), &d2).unwrap();
        let b = pairing(&mg.apply(&d2).unwrap(), &d1).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-12);
        prop_assert!(pairing(&mg.apply(&d1).unwrap(), &d1).unwrap() > 0.0);
    }

    #[test]
    fn aux_pencil_stays_in_the_two_sided_band(n in 1usize..5, s in -1.0f64..=0.0) {
        let lvl = LevelMatrices::assemble(&MeshLevel::uniform(n).unwrap(), 0);
        let lp = spectral::lambda_pair(&lvl).unwrap();
        let ap = spectral::laplacian_pair(&lvl).unwrap();
        let spec = AuxSpectrum::new(&lvl, &lp, &ap).unwrap();
        let beta2 = spectral::inf_sup_beta(&lvl).unwrap().powi(2);
        let ev = spec.eigenvalues(s).unwrap();
        prop_assert!(ev[0] >= beta2.powf(1.0 + s) - 1e-9);
        prop_assert!(ev[ev.len() - 1] <= 1.0 + 1e-9);
    }

    #[test]
    fn pcg_report_invariants(s in 0.0f64..=1.0, seed in any::<u64>()) {
        let disc = Discretization::new(1, 3, Execution::Sequential).unwrap();
        let lvl = disc.finest();
        let pair = spectral::lambda_pair(lvl).unwrap();
        let mg = AdditiveMg::setup(&disc, s, Execution::Sequential).unwrap();
        let op = |c: &CoeffVector| pair.frac_apply_dualform(s, c);
        let n = lvl.dim_v();
        let rhs = DualVector::new(Space::RaviartThomas, 2, random(n, seed));
        let x0 = CoeffVector::zeros(Space::RaviartThomas, 2, n);
        let opts = PcgOptions::new(1e-9, 200);
        let (x, report) = pcg(&op, &mg, &rhs, x0, &opts).unwrap();
        prop_assert!(report.converged);
        prop_assert!(report.cond_estimate >= 1.0);
        prop_assert!(*report.residual_history.last().unwrap() <= opts.tol);
        prop_assert_eq!(report.residual_history.len(), report.iterations + 1);
        let ax = op(&x).unwrap();
        let mut r = rhs.values.clone();
        linalg::axpy(-1.0, &ax.values, &mut r);
        prop_assert!(linalg::norm(&r) <= 1e-3 * linalg::norm(&rhs.values));
    }
}
