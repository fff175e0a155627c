//! Numerical checks of the operator inequalities and identities the
//! preconditioners rely on.
//!
//! Inequalities are tested as eigenvalue statements about difference or
//! quotient pencils rather than on sampled vectors. A report's worst
//! violation is scaled by the largest eigenvalue involved, so a check passes
//! when it is no more negative than the tolerance.

use std::fmt;
use std::io::Write;

use faer::{Mat, MatRef, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::amg::AdditiveMg;
use crate::auxprec::AuxSpectrum;
use crate::exec::Execution;
use crate::fem::Discretization;
use crate::linalg;
use crate::spectral::{self, SpectralPair};
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    /// Exponents the check ran over.
    pub grid: Vec<f64>,
    /// Random trials, or mesh levels for the discretization checks.
    pub trials: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Measured constants, by name.
    pub constants: Vec<(String, f64)>,
}

impl InequalityReport {
    fn new(name: &str, grid: &[f64], trials: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            grid: grid.to_vec(),
            trials,
            worst_violation: worst,
            tolerance,
            passed: worst >= -tolerance,
            constants: Vec::new(),
        }
    }

    fn with_constants(mut self, constants: Vec<(String, f64)>) -> Self {
        self.constants = constants;
        self
    }
}

impl fmt::Display for InequalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<28} {} worst={:+.3e} tol={:.0e} trials={} grid={}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.worst_violation,
            self.tolerance,
            self.trials,
            self.grid.len()
        )?;
        for (k, v) in &self.constants {
            write!(f, " {k}={v:.4}")?;
        }
        Ok(())
    }
}

/// `{0, 1/steps, …, 1}`.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Writes one CSV row per report plus one per measured constant.
pub fn write_csv<W: Write>(reports: &[InequalityReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["check", "passed", "worst_violation", "tolerance", "trials", "constant", "value"])?;
    for r in reports {
        let base = [
            r.name.clone(),
            r.passed.to_string(),
            format!("{:e}", r.worst_violation),
            format!("{:e}", r.tolerance),
            r.trials.to_string(),
        ];
        out.write_record(base.iter().map(String::as_str).chain(["", ""]))?;
        for (k, v) in &r.constants {
            out.write_record(base.iter().map(String::as_str).chain([k.as_str(), &format!("{v}")]))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Result<Mat<f64>> {
    let g = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut sym = &g + g.transpose();
    linalg::symmetrize(&mut sym);
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(evd.U().to_owned())
}

/// `Q diag(values) Qᵀ` for a random orthogonal `Q`.
fn random_symmetric(values: &[f64], rng: &mut ChaCha8Rng) -> Result<Mat<f64>> {
    let n = values.len();
    let q = random_orthogonal(n, rng)?;
    let scaled = Mat::from_fn(n, n, |i, j| q[(i, j)] * values[j]);
    let mut a = &scaled * q.transpose();
    linalg::symmetrize(&mut a);
    Ok(a)
}

/// Positive semidefinite with roughly a quarter of its spectrum at zero.
fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> Result<Mat<f64>> {
    let values: Vec<f64> =
        (0..n).map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.05..2.0) }).collect();
    random_symmetric(&values, rng)
}

/// `rows × cols` with singular values in `[0.2, 1]`.
fn random_contraction(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Result<Mat<f64>> {
    let u = random_orthogonal(rows, rng)?;
    let v = random_orthogonal(cols, rng)?;
    let r = rows.min(cols);
    let sigma: Vec<f64> = (0..r).map(|_| rng.random_range(0.2..1.0)).collect();
    Ok(Mat::from_fn(rows, cols, |i, j| (0..r).map(|k| u[(i, k)] * sigma[k] * v[(j, k)]).sum()))
}

/// Smallest eigenvalue of `big − small`, scaled by the larger spectral radius.
fn scaled_min_gap(big: MatRef<'_, f64>, small: MatRef<'_, f64>) -> Result<f64> {
    let mut diff = linalg::sub(big, small);
    linalg::symmetrize(&mut diff);
    let gap = linalg::symmetric_eigenvalues(diff.as_ref())?[0];
    let radius = |m: MatRef<'_, f64>| -> Result<f64> {
        let ev = linalg::symmetric_eigenvalues(m)?;
        Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
    };
    let scale = radius(big)?.max(radius(small)?).max(f64::MIN_POSITIVE);
    Ok(gap / scale)
}

/// `Tᵀ A^s T ≤ (Tᵀ A T)^s` for contractions `T` and positive semidefinite `A`.
pub fn check_jensen(trials: usize, max_dim: usize, grid: &[f64], seed: u64) -> Result<InequalityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let n = rng.random_range(1..=max_dim);
        let m = rng.random_range(1..=max_dim);
        let a = random_psd(n, &mut rng)?;
        let t = random_contraction(n, m, &mut rng)?;
        let mut tat = t.transpose() * &a * &t;
        linalg::symmetrize(&mut tat);
        for &s in grid {
            let mut lhs = t.transpose() * spectral::symmetric_power(a.as_ref(), s)? * &t;
            linalg::symmetrize(&mut lhs);
            let rhs = spectral::symmetric_power(tat.as_ref(), s)?;
            worst = worst.min(scaled_min_gap(rhs.as_ref(), lhs.as_ref())?);
        }
    }
    Ok(InequalityReport::new("jensen", grid, trials, worst, DEFAULT_TOLERANCE))
}

/// `A ≤ B ⇒ A^s ≤ B^s` for `s ∈ [0, 1]`, with `B = A + CᵀC`.
pub fn check_loewner_heinz(trials: usize, max_dim: usize, grid: &[f64], seed: u64) -> Result<InequalityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let n = rng.random_range(1..=max_dim);
        let k = rng.random_range(1..=n);
        let a = random_psd(n, &mut rng)?;
        let c = Mat::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
        let mut b = &a + c.transpose() * &c;
        linalg::symmetrize(&mut b);
        for &s in grid {
            let bs = spectral::symmetric_power(b.as_ref(), s)?;
            let as_ = spectral::symmetric_power(a.as_ref(), s)?;
            worst = worst.min(scaled_min_gap(bs.as_ref(), as_.as_ref())?);
        }
    }
    Ok(InequalityReport::new("loewner_heinz", grid, trials, worst, DEFAULT_TOLERANCE))
}

/// Spectral pairs of every level of a small discretization.
fn level_pairs(disc: &Discretization, exec: Execution) -> Result<Vec<SpectralPair>> {
    exec.map(&disc.levels, spectral::lambda_pair).into_iter().collect()
}

fn dense_prolongation(disc: &Discretization, coarse: usize) -> Mat<f64> {
    linalg::to_dense(&disc.prolongations[coarse].v)
}

/// Largest eigenvalue of the pencil `(B, A)`.
fn pencil_max(b: &Mat<f64>, a: &Mat<f64>) -> Result<f64> {
    let ev = spectral::generalized_eigenvalues(b.as_ref(), a.as_ref())?;
    Ok(ev[ev.len() - 1])
}

/// Fractional forms are not inherited by coarser levels, but
/// `Pᵀ Λ_k^s P ≤ Λ_{k−1}^s` holds for the natural inclusion `P`.
pub fn check_noninheritance(disc: &Discretization, grid: &[f64], exec: Execution) -> Result<InequalityReport> {
    let pairs = level_pairs(disc, exec)?;
    let mut worst = f64::INFINITY;
    // Curl fields are inherited exactly, so the largest ratio is 1; the
    // smallest one measures how far the fractional forms are from inherited.
    let mut min_ratio = f64::INFINITY;
    for k in 1..disc.num_levels() {
        let p = dense_prolongation(disc, k - 1);
        for &s in grid {
            let mut restricted = p.transpose() * pairs[k].dualform_matrix(s) * &p;
            linalg::symmetrize(&mut restricted);
            let ev = spectral::generalized_eigenvalues(restricted.as_ref(), pairs[k - 1].dualform_matrix(s).as_ref())?;
            worst = worst.min(1.0 - ev[ev.len() - 1]);
            min_ratio = min_ratio.min(ev[0]);
        }
    }
    Ok(InequalityReport::new("noninheritance", grid, disc.num_levels() - 1, worst, DEFAULT_TOLERANCE)
        .with_constants(vec![("min_ratio".into(), min_ratio)]))
}

/// `P^s_{k,k−1} = (Λ_{k−1}^s)⁻¹ Pᵀ Λ_k^s` as a coefficient map.
fn fractional_projection(fine: &Mat<f64>, coarse: &Mat<f64>, p: &Mat<f64>) -> Result<Mat<f64>> {
    let rhs = p.transpose() * fine;
    linalg::spd_solve(coarse.as_ref(), rhs.as_ref())
}

/// `⟨Λ_k^s P^s_k τ, P^s_k τ⟩ ≤ ⟨Λ_h^s τ, τ⟩` for the chained fractional
/// projections `P^s_k` from the finest level.
pub fn check_noninheritance_adjoint(disc: &Discretization, grid: &[f64], exec: Execution) -> Result<InequalityReport> {
    let pairs = level_pairs(disc, exec)?;
    let top = disc.finest_level();
    let mut worst = f64::INFINITY;
    let mut max_defect = 0.0f64;
    for &s in grid {
        let forms: Vec<Mat<f64>> = pairs.iter().map(|p| p.dualform_matrix(s)).collect();
        let n = forms[top].nrows();
        let mut chain = Mat::<f64>::identity(n, n);
        for k in (0..top).rev() {
            let step = fractional_projection(&forms[k + 1], &forms[k], &dense_prolongation(disc, k))?;
            chain = step * &chain;
            let mut lhs = chain.transpose() * &forms[k] * &chain;
            linalg::symmetrize(&mut lhs);
            let theta = pencil_max(&lhs, &forms[top])?;
            worst = worst.min(1.0 - theta);

            // Distance of P^s_k from being idempotent on V_k.
            let mut embed = Mat::<f64>::identity(forms[k].nrows(), forms[k].nrows());
            for j in k..top {
                embed = dense_prolongation(disc, j) * &embed;
            }
            let back = &chain * &embed;
            let id = Mat::<f64>::identity(back.nrows(), back.ncols());
            max_defect = max_defect.max(linalg::max_abs(linalg::sub(back.as_ref(), id.as_ref()).as_ref()));
        }
    }
    Ok(InequalityReport::new("noninheritance_adjoint", grid, top, worst, DEFAULT_TOLERANCE)
        .with_constants(vec![("max_projection_defect".into(), max_defect)]))
}

/// `Λ_k^s P^s_k = Q_k Λ_h^s` with `P^s_k` built as a product of one-level
/// fractional projections and `Q_k` realized as the transposed prolongation chain.
pub fn check_projection_identity(
    disc: &Discretization,
    grid: &[f64],
    seed: u64,
    exec: Execution,
) -> Result<InequalityReport> {
    let pairs = level_pairs(disc, exec)?;
    let top = disc.finest_level();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &s in grid {
        let forms: Vec<Mat<f64>> = pairs.iter().map(|p| p.dualform_matrix(s)).collect();
        let c: Vec<f64> = (0..forms[top].nrows()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut projected = c.clone();
        let mut restricted = linalg::gemv(forms[top].as_ref(), &c);
        for k in (0..top).rev() {
            let step = fractional_projection(&forms[k + 1], &forms[k], &dense_prolongation(disc, k))?;
            projected = linalg::gemv(step.as_ref(), &projected);
            restricted = linalg::spmv_transpose(&disc.prolongations[k].v, &restricted);
            let lhs = linalg::gemv(forms[k].as_ref(), &projected);
            let mut diff = lhs.clone();
            linalg::axpy(-1.0, &restricted, &mut diff);
            worst = worst.max(linalg::norm(&diff) / linalg::norm(&restricted).max(f64::MIN_POSITIVE));
        }
    }
    Ok(InequalityReport::new("projection_identity", grid, top, -worst, 1e-10))
}

/// The pencil `(Dᵀ Λ^{-(1−t)} D, A^t form)` has its spectrum in `[β^{2(1−t)}, 1]`.
pub fn check_aux_bounds(disc: &Discretization, grid: &[f64], exec: Execution) -> Result<InequalityReport> {
    let per_level: Vec<Result<(f64, f64)>> = exec.map(&disc.levels, |lvl| {
        let lp = spectral::lambda_pair(lvl)?;
        let ap = spectral::laplacian_pair(lvl)?;
        let spec = AuxSpectrum::new(lvl, &lp, &ap)?;
        let beta2 = spec.beta_squared()?;
        let mut worst = f64::INFINITY;
        for &t in grid {
            let ev = spec.eigenvalues(-t)?;
            let lower = beta2.powf(1.0 - t);
            worst = worst.min(ev[0] - lower).min(1.0 - ev[ev.len() - 1]);
        }
        Ok((worst, beta2))
    });
    let mut worst = f64::INFINITY;
    let mut constants = Vec::new();
    for (lvl, r) in disc.levels.iter().zip(per_level) {
        let (w, beta2) = r?;
        worst = worst.min(w);
        constants.push((format!("beta^-2_n{}", lvl.n), 1.0 / beta2));
    }
    Ok(InequalityReport::new("aux_bounds", grid, disc.num_levels(), worst, DEFAULT_TOLERANCE).with_constants(constants))
}

/// `Λ^s` is the identity on `curl C_h` and acts as `(I + A)^s` on `∇_h S_h`.
pub fn check_helmholtz_invariance(
    disc: &Discretization,
    grid: &[f64],
    seed: u64,
    exec: Execution,
) -> Result<InequalityReport> {
    let per_level: Vec<Result<f64>> = exec.map_range(disc.num_levels(), |k| {
        let lvl = &disc.levels[k];
        let lp = spectral::lambda_pair(lvl)?;
        let ap = spectral::laplacian_pair(lvl)?;
        let mass_v = lvl.mass_v_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let mut worst = 0.0f64;
        let rel = |a: &[f64], b: &[f64]| {
            let mut d = a.to_vec();
            linalg::axpy(-1.0, b, &mut d);
            linalg::norm(&d) / linalg::norm(b).max(f64::MIN_POSITIVE)
        };
        for &s in grid {
            for _ in 0..3 {
                let q: Vec<f64> = (0..lvl.dim_c()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let curl = linalg::spmv(&lvl.curl_coefficients, &q);
                let got = lp.frac_apply_dualform_raw(s, &curl);
                worst = worst.max(rel(&got, &linalg::spmv(&lvl.mass_v, &curl)));

                let u: Vec<f64> = (0..lvl.dim_s()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let du = linalg::spmv(&lvl.grad, &u);
                let rhs = Mat::from_fn(du.len(), 1, |i, _| du[i]);
                let grad = linalg::column(linalg::spd_solve(mass_v.as_ref(), rhs.as_ref())?.as_ref(), 0);
                let got = lp.frac_apply_dualform_raw(s, &grad);
                let mu: Vec<f64> = lvl.mass_s.iter().zip(&u).map(|(m, x)| m * x).collect();
                let mut w = linalg::gemv_transpose(ap.vectors(), &mu);
                for (wi, a) in w.iter_mut().zip(ap.eigenvalues()) {
                    *wi *= (1.0 + a).powf(s);
                }
                let shifted = linalg::gemv(ap.vectors(), &w);
                worst = worst.max(rel(&got, &linalg::spmv(&lvl.grad, &shifted)));
            }
        }
        Ok(worst)
    });
    let mut worst = 0.0f64;
    for r in per_level {
        worst = worst.max(r?);
    }
    Ok(InequalityReport::new("helmholtz_invariance", grid, disc.num_levels(), -worst, DEFAULT_TOLERANCE))
}

/// Dense matrix of the level smoother `R^s_k` (dual to coefficient).
fn smoother_matrix(mg: &AdditiveMg, level: usize, dim: usize) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        for (i, v) in mg.apply_level(level, &e).into_iter().enumerate() {
            out[(i, j)] = v;
        }
        e[j] = 0.0;
    }
    linalg::symmetrize(&mut out);
    out
}

/// Upper smoother bound: `λ_max(R^s_k, Λ_k^{-s}) ≤ K₀^{1−s} K₁^s`, with
/// `K₀`, `K₁` the measured extremes at `s = 0` and `s = 1`.
pub fn check_smoother_bounds(disc: &Discretization, grid: &[f64], exec: Execution) -> Result<InequalityReport> {
    let pairs = level_pairs(disc, exec)?;
    let mut extended: Vec<f64> = grid.to_vec();
    extended.extend([0.0, 1.0]);
    let mut lmax = vec![Vec::new(); disc.num_levels()];
    for &s in &extended {
        let mg = AdditiveMg::setup(disc, s, exec)?;
        for k in 1..disc.num_levels() {
            let r = smoother_matrix(&mg, k, disc.levels[k].dim_v());
            lmax[k].push(pencil_max(&r, &pairs[k].frac_matrix(s))?);
        }
    }
    let mut worst = f64::INFINITY;
    let mut constants = Vec::new();
    for (k, values) in lmax.iter().enumerate().skip(1) {
        let (k0, k1) = (values[grid.len()], values[grid.len() + 1]);
        for (&s, &l) in grid.iter().zip(values) {
            let bound = k0.powf(1.0 - s) * k1.powf(s);
            worst = worst.min((bound - l) / bound);
        }
        constants.push((format!("K0_level{k}"), k0));
        constants.push((format!("K1_level{k}"), k1));
    }
    Ok(InequalityReport::new("smoother_bounds", grid, disc.num_levels() - 1, worst, 1e-8).with_constants(constants))
}

/// Smallest eigenvalue of `((R^s_k)⁻¹, Λ_k^s)` on the range of `I − P P^s_{k,k−1}`.
/// The check passes while the measured constant stays positive on every level.
pub fn check_stable_decomposition(disc: &Discretization, grid: &[f64], exec: Execution) -> Result<InequalityReport> {
    let pairs = level_pairs(disc, exec)?;
    let mut per_level = vec![f64::INFINITY; disc.num_levels()];
    for &s in grid {
        let mg = AdditiveMg::setup(disc, s, exec)?;
        for k in 1..disc.num_levels() {
            let n = disc.levels[k].dim_v();
            let r = smoother_matrix(&mg, k, n);
            let r_inv = linalg::spd_solve(r.as_ref(), Mat::<f64>::identity(n, n).as_ref())?;
            let fine = pairs[k].dualform_matrix(s);
            let p = dense_prolongation(disc, k - 1);
            let proj = fractional_projection(&fine, &pairs[k - 1].dualform_matrix(s), &p)?;
            let w = linalg::sub(Mat::<f64>::identity(n, n).as_ref(), (&p * &proj).as_ref());
            let basis = range_basis(&w)?;
            let mut lhs = basis.transpose() * &r_inv * &basis;
            let mut rhs = basis.transpose() * &fine * &basis;
            linalg::symmetrize(&mut lhs);
            linalg::symmetrize(&mut rhs);
            let ev = spectral::generalized_eigenvalues(lhs.as_ref(), rhs.as_ref())?;
            per_level[k] = per_level[k].min(ev[0]);
        }
    }
    let worst = per_level.iter().skip(1).fold(f64::INFINITY, |m, &x| m.min(x));
    let constants = per_level.iter().enumerate().skip(1).map(|(k, &v)| (format!("lambda_min_level{k}"), v)).collect();
    Ok(InequalityReport::new("stable_decomposition", grid, disc.num_levels() - 1, worst, 0.0).with_constants(constants))
}

/// Orthonormal basis of the column space of `w`.
fn range_basis(w: &Mat<f64>) -> Result<Mat<f64>> {
    let mut gram = w * w.transpose();
    linalg::symmetrize(&mut gram);
    let evd = gram.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let ev: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let cut = 1e-10 * ev[ev.len() - 1];
    let keep: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] > cut).collect();
    let u = evd.U();
    Ok(Mat::from_fn(u.nrows(), keep.len(), |i, j| u[(i, keep[j])]))
}

/// Parameters of the full verification run.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub trials: usize,
    pub max_dim: usize,
    pub grid: Vec<f64>,
    /// Mesh hierarchy used by the discretization checks.
    pub coarse_cells: usize,
    pub levels: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { trials: 200, max_dim: 40, grid: unit_grid(10), coarse_cells: 2, levels: 3, seed: 2024 }
    }
}

/// Runs every check; the reports come back in a fixed order.
pub fn run_all(config: &VerifyConfig, exec: Execution) -> Result<Vec<InequalityReport>> {
    let disc = Discretization::new(config.coarse_cells, config.levels, exec)?;
    // The fractional-projection identity is checked on the meshes up to n = 4.
    let small = Discretization::new(1, 3, exec)?;
    let g = &config.grid;
    let seed = config.seed;
    let checks: Vec<Box<dyn Fn() -> Result<InequalityReport> + Sync>> = vec![
        Box::new(|| check_jensen(config.trials, config.max_dim, g, seed)),
        Box::new(|| check_loewner_heinz(config.trials, config.max_dim, g, seed.wrapping_add(1))),
        Box::new(|| check_noninheritance(&disc, g, Execution::Sequential)),
        Box::new(|| check_noninheritance_adjoint(&disc, g, Execution::Sequential)),
        Box::new(|| check_aux_bounds(&disc, g, Execution::Sequential)),
        Box::new(|| check_helmholtz_invariance(&disc, g, seed.wrapping_add(2), Execution::Sequential)),
        Box::new(|| check_projection_identity(&small, g, seed.wrapping_add(3), Execution::Sequential)),
        Box::new(|| check_smoother_bounds(&disc, g, Execution::Sequential)),
        Box::new(|| check_stable_decomposition(&disc, g, Execution::Sequential)),
    ];
    exec.map(&checks, |c| c()).into_iter().collect()
}
