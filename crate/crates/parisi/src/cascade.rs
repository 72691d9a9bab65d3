//! The cascade transform `psi`.
//!
//! For a monotone PSD step path `q` with levels `q_1 <= ... <= q_K` on the
//! grid `0 = z_0 < ... < z_K = 1` and a finitely supported measure `P1`,
//! `psi(q)` is computed by the exact backward recursion: the innermost value
//! is
//!
//! ```text
//! Y_K = log sum_atoms w exp( sqrt(2) sum_l (C_l g_l) . x  -  x . q_K x )
//! ```
//!
//! with `C_l` the PSD square root of `q_l - q_{l-1}` and `g_l` independent
//! standard Gaussians, followed by `Y_{l-1} = (1/z_{l-1}) log E exp(z_{l-1}
//! Y_l)` for `l = K..2` and a plain expectation for the outermost Gaussian
//! (the `z_0 = 0` limit). The reported value is `-Y_0`, matching the free
//! energy sign convention, so `psi >= 0` and `psi(0) = 0`.
//!
//! Gaussian expectations use tensor Gauss-Hermite quadrature by default and
//! a deterministic sample tree beyond 8 Gaussian dimensions.

use crate::model::{ModelInstance, SpinMeasure};
use crate::paths::{MatrixPath, PairPath, PermMatrix, ScalarPath};
use crate::quadrature::{gauss_hermite, pairwise_sum};
use crate::rng::{derive_rng, tags};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// How Gaussian expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum QuadMode {
    /// Tensor Gauss-Hermite with this many nodes per Gaussian dimension.
    TensorHermite { nodes: usize },
    /// Deterministic antithetic sample tree with roughly this many leaves.
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureConfig {
    pub mode: QuadMode,
    /// Master seed for Monte-Carlo streams.
    pub rng_seed: u64,
    /// Evaluate product measures coordinatewise on diagonal paths.
    pub product_fast_path: bool,
    /// Tensor mode: also evaluate at twice the node count and report the
    /// doubled-node value with `|v_2n - v_n|` as the error estimate.
    pub error_estimate: bool,
}

impl QuadratureConfig {
    pub fn tensor(nodes: usize) -> QuadratureConfig {
        QuadratureConfig {
            mode: QuadMode::TensorHermite { nodes },
            rng_seed: 0,
            product_fast_path: true,
            error_estimate: true,
        }
    }

    pub fn monte_carlo(samples: usize, rng_seed: u64) -> QuadratureConfig {
        QuadratureConfig {
            mode: QuadMode::MonteCarlo { samples },
            rng_seed,
            product_fast_path: true,
            error_estimate: true,
        }
    }

    /// Tensor rule sized to the Gaussian dimension count `d * k`, falling
    /// back to the sample tree beyond 8 dimensions.
    pub fn auto(gauss_dims: usize, rng_seed: u64) -> QuadratureConfig {
        let nodes = match gauss_dims {
            0 | 1 => 32,
            2 => 24,
            3 => 16,
            4 => 12,
            5 => 8,
            6 => 7,
            7 => 5,
            8 => 4,
            _ => {
                return QuadratureConfig::monte_carlo(20_000, rng_seed);
            }
        };
        QuadratureConfig {
            mode: QuadMode::TensorHermite { nodes },
            rng_seed,
            product_fast_path: true,
            error_estimate: true,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.mode {
            QuadMode::TensorHermite { nodes } if nodes < 3 => Err(Error::InvalidConfig(
                format!("tensor mode needs at least 3 nodes, got {nodes}"),
            )),
            QuadMode::MonteCarlo { samples } if samples < 10_000 => Err(Error::InvalidConfig(
                format!("monte-carlo mode needs at least 10^4 samples, got {samples}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Per-level diagnostic attached to every cascade evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct LevelDiag {
    /// Left grid point of the level (its reweighting exponent).
    pub zeta_left: f64,
    /// Frobenius norm of the level increment.
    pub increment_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeResult {
    pub value: f64,
    /// Estimated quadrature error (node-doubling difference in tensor mode,
    /// half-split deviation in Monte-Carlo mode).
    pub quad_error: f64,
    pub levels: Vec<LevelDiag>,
}

struct Atom {
    coords: Vec<f64>,
    /// `log w - x . q_K x`.
    base: f64,
}

struct CascadeProblem {
    /// PSD square roots of the level increments.
    factors: Vec<DMatrix<f64>>,
    /// Grid `0 = z_0 < ... < z_K = 1`.
    zetas: Vec<f64>,
    atoms: Vec<Atom>,
    dim: usize,
}

impl CascadeProblem {
    fn new(grid: &[f64], increments: Vec<DMatrix<f64>>, last: &DMatrix<f64>, p1: &SpinMeasure) -> CascadeProblem {
        let dim = last.nrows();
        let atoms = p1
            .atoms()
            .iter()
            .map(|(x, w)| {
                let mut quad = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        quad += x[i] * last[(i, j)] * x[j];
                    }
                }
                Atom {
                    coords: x.clone(),
                    base: w.ln() - quad,
                }
            })
            .collect();
        CascadeProblem {
            factors: increments,
            zetas: grid.to_vec(),
            atoms,
            dim,
        }
    }

    fn diagnostics(&self) -> Vec<LevelDiag> {
        self.factors
            .iter()
            .enumerate()
            .map(|(l, c)| LevelDiag {
                zeta_left: self.zetas[l],
                increment_norm: (c * c.transpose()).norm(),
            })
            .collect()
    }
}

/// Weighted log-mean-exp with exponent `zeta`; `zeta = 0` degenerates to the
/// plain weighted mean.
fn combine(vals: &[f64], log_weights: &[f64], zeta: f64) -> f64 {
    if zeta <= 0.0 {
        let terms: Vec<f64> = vals
            .iter()
            .zip(log_weights)
            .map(|(v, lw)| v * lw.exp())
            .collect();
        return pairwise_sum(&terms);
    }
    let m = vals
        .iter()
        .zip(log_weights)
        .map(|(v, lw)| lw + zeta * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = vals
        .iter()
        .zip(log_weights)
        .map(|(v, lw)| (lw + zeta * v - m).exp())
        .collect();
    (m + pairwise_sum(&terms).ln()) / zeta
}

/// Tensor-quadrature data for one level: per node tuple, the log weight and
/// the `sqrt(2) (C g) . x` contribution to each atom.
struct LevelNodes {
    log_weights: Vec<f64>,
    contribs: Vec<Vec<f64>>,
}

fn tensor_level_nodes(problem: &CascadeProblem, level: usize, nodes: usize) -> LevelNodes {
    let rule = gauss_hermite(nodes);
    let d = problem.dim;
    let tuples = nodes.pow(d as u32);
    let mut log_weights = Vec::with_capacity(tuples);
    let mut contribs = Vec::with_capacity(tuples);
    let c = &problem.factors[level];
    let mut idx = vec![0usize; d];
    for _ in 0..tuples {
        let mut lw = 0.0;
        let mut z = vec![0.0f64; d];
        for (k, &i) in idx.iter().enumerate() {
            lw += rule.weights[i].ln();
            z[k] = rule.nodes[i];
        }
        let mut field = vec![0.0f64; d];
        for r in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += c[(r, k)] * z[k];
            }
            field[r] = acc;
        }
        let contrib: Vec<f64> = problem
            .atoms
            .iter()
            .map(|a| {
                std::f64::consts::SQRT_2
                    * field.iter().zip(&a.coords).map(|(f, x)| f * x).sum::<f64>()
            })
            .collect();
        log_weights.push(lw);
        contribs.push(contrib);
        // Odometer in lexicographic order; fixed order keeps results
        // reproducible.
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
        }
    }
    LevelNodes {
        log_weights,
        contribs,
    }
}

fn eval_tensor(problem: &CascadeProblem, nodes: usize) -> f64 {
    let levels: Vec<LevelNodes> = (0..problem.factors.len())
        .map(|l| tensor_level_nodes(problem, l, nodes))
        .collect();
    let n_atoms = problem.atoms.len();
    let bases: Vec<f64> = problem.atoms.iter().map(|a| a.base).collect();

    fn rec(
        problem: &CascadeProblem,
        levels: &[LevelNodes],
        bases: &[f64],
        l: usize,
        acc: &mut Vec<f64>,
    ) -> f64 {
        let k = problem.factors.len();
        if l == k {
            let terms: Vec<f64> = bases.iter().zip(acc.iter()).map(|(b, a)| b + a).collect();
            let m = terms.iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y));
            let exps: Vec<f64> = terms.iter().map(|t| (t - m).exp()).collect();
            return m + pairwise_sum(&exps).ln();
        }
        let data = &levels[l];
        let saved = acc.clone();
        let mut vals = Vec::with_capacity(data.contribs.len());
        for contrib in &data.contribs {
            for (a, c) in acc.iter_mut().zip(contrib) {
                *a += c;
            }
            vals.push(rec(problem, levels, bases, l + 1, acc));
            acc.copy_from_slice(&saved);
        }
        combine(&vals, &data.log_weights, problem.zetas[l])
    }

    // The outermost Gaussian parallelizes; the ordered collect plus serial
    // combine is bit-identical to single-threaded evaluation.
    if problem.factors.is_empty() {
        let mut acc = vec![0.0; n_atoms];
        return -rec(problem, &levels, &bases, 0, &mut acc);
    }
    let top = &levels[0];
    let vals: Vec<f64> = top
        .contribs
        .par_iter()
        .map(|contrib| {
            let mut acc = contrib.clone();
            rec(problem, &levels, &bases, 1, &mut acc)
        })
        .collect();
    -combine(&vals, &top.log_weights, problem.zetas[0])
}

fn eval_mc(problem: &CascadeProblem, samples: usize, seed: u64) -> (f64, f64) {
    let k = problem.factors.len().max(1);
    // Branching factor per level, even for antithetic pairing.
    let mut branch = ((samples as f64).powf(1.0 / k as f64).ceil() as usize).max(2);
    if branch % 2 == 1 {
        branch += 1;
    }
    let mut rng = derive_rng(seed, &[tags::CASCADE_MC]);
    let bases: Vec<f64> = problem.atoms.iter().map(|a| a.base).collect();
    let log_w = -(branch as f64).ln();

    fn rec(
        problem: &CascadeProblem,
        bases: &[f64],
        branch: usize,
        log_w: f64,
        l: usize,
        acc: &mut Vec<f64>,
        rng: &mut rand_chacha::ChaCha8Rng,
        top_vals: &mut Option<&mut Vec<f64>>,
    ) -> f64 {
        let k = problem.factors.len();
        if l == k {
            let terms: Vec<f64> = bases.iter().zip(acc.iter()).map(|(b, a)| b + a).collect();
            let m = terms.iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y));
            let exps: Vec<f64> = terms.iter().map(|t| (t - m).exp()).collect();
            return m + pairwise_sum(&exps).ln();
        }
        let d = problem.dim;
        let c = &problem.factors[l];
        let saved = acc.clone();
        let mut vals = Vec::with_capacity(branch);
        for pair in 0..branch / 2 {
            let z: Vec<f64> = (0..d)
                .map(|_| {
                    // Box-Muller on the shared stream keeps the tree
                    // deterministic in DFS order.
                    let u1: f64 = rng.gen_range(1e-16..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect();
            for sign in [1.0f64, -1.0] {
                let mut field = vec![0.0f64; d];
                for r in 0..d {
                    let mut accf = 0.0;
                    for kk in 0..d {
                        accf += c[(r, kk)] * sign * z[kk];
                    }
                    field[r] = accf;
                }
                for (a, atom) in acc.iter_mut().zip(&problem.atoms) {
                    *a += std::f64::consts::SQRT_2
                        * field
                            .iter()
                            .zip(&atom.coords)
                            .map(|(f, x)| f * x)
                            .sum::<f64>();
                }
                vals.push(rec(problem, bases, branch, log_w, l + 1, acc, rng, &mut None));
                acc.copy_from_slice(&saved);
            }
            let _ = pair;
        }
        if l == 0 {
            if let Some(out) = top_vals {
                out.extend_from_slice(&vals);
            }
        }
        let log_weights = vec![log_w; vals.len()];
        combine(&vals, &log_weights, problem.zetas[l])
    }

    let mut acc = vec![0.0; problem.atoms.len()];
    let mut top = Vec::new();
    let value = -rec(
        problem,
        &bases,
        branch,
        log_w,
        0,
        &mut acc,
        &mut rng,
        &mut Some(&mut top),
    );
    // Half-split spread of the outermost plain mean as the error signal.
    let err = if top.len() >= 4 {
        let half = top.len() / 2;
        let a = pairwise_sum(&top[..half]) / half as f64;
        let b = pairwise_sum(&top[half..]) / (top.len() - half) as f64;
        0.5 * (a - b).abs()
    } else {
        f64::NAN
    };
    (value, err)
}

fn run(problem: &CascadeProblem, quad: &QuadratureConfig) -> Result<CascadeResult> {
    quad.validate()?;
    let diagnostics = problem.diagnostics();
    match quad.mode {
        QuadMode::TensorHermite { nodes } => {
            if quad.error_estimate {
                let lo = eval_tensor(problem, nodes);
                let hi = eval_tensor(problem, nodes * 2);
                Ok(CascadeResult {
                    value: hi,
                    quad_error: (hi - lo).abs(),
                    levels: diagnostics,
                })
            } else {
                Ok(CascadeResult {
                    value: eval_tensor(problem, nodes),
                    quad_error: f64::NAN,
                    levels: diagnostics,
                })
            }
        }
        QuadMode::MonteCarlo { samples } => {
            let (value, err) = eval_mc(problem, samples, quad.rng_seed);
            Ok(CascadeResult {
                value,
                quad_error: err,
                levels: diagnostics,
            })
        }
    }
}

/// PSD square root with eigenvalue clipping at the monotonicity tolerance.
fn psd_sqrt(m: &DMatrix<f64>, level: usize) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut out = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k];
        if lam < -crate::paths::MONOTONE_TOL {
            return Err(Error::NonMonotonePath {
                level,
                min_eig: lam,
            });
        }
        let v = eig.eigenvectors.column(k);
        out += lam.max(0.0).sqrt() * &v * v.transpose();
    }
    Ok(out)
}

/// `psi` of a PSD step path.
pub fn psi(q: &MatrixPath, p1: &SpinMeasure, quad: &QuadratureConfig) -> Result<CascadeResult> {
    if q.dim() != p1.dimension() {
        return Err(Error::DimensionMismatch {
            expected: p1.dimension(),
            got: q.dim(),
        });
    }
    let d = q.dim();
    let mut increments = Vec::with_capacity(q.levels());
    let mut prev = DMatrix::<f64>::zeros(d, d);
    for (l, v) in q.values().iter().enumerate() {
        increments.push(psd_sqrt(&(v - &prev), l)?);
        prev = v.clone();
    }
    let problem = CascadeProblem::new(q.grid(), increments, q.values().last().unwrap(), p1);
    run(&problem, quad)
}

/// `psi` gated on sampleability: formal interaction functions are rejected
/// before any cascade work.
pub fn psi_for_model(model: &ModelInstance, q: &MatrixPath, quad: &QuadratureConfig) -> Result<CascadeResult> {
    if model.covariance.formal() {
        return Err(Error::FormalSpecRejected);
    }
    psi(q, &model.measure, quad)
}

/// `psi` of a permutation-invariant pair path: the lift `m(q1, q2)` with
/// square roots taken in eigenvalue coordinates.
pub fn psi_pair(q: &PairPath, d: usize, p1: &SpinMeasure, quad: &QuadratureConfig) -> Result<CascadeResult> {
    if d != p1.dimension() {
        return Err(Error::DimensionMismatch {
            expected: p1.dimension(),
            got: d,
        });
    }
    let mut increments = Vec::with_capacity(q.levels());
    let mut prev = [0.0f64; 2];
    for (l, v) in q.values().iter().enumerate() {
        let d1 = v[0] - prev[0];
        let d2 = v[1] - prev[1];
        if d1 < -crate::paths::MONOTONE_TOL || d2 < -crate::paths::MONOTONE_TOL {
            return Err(Error::NonMonotonePath {
                level: l,
                min_eig: d1.min(d2),
            });
        }
        increments.push(PermMatrix::new(d, d1.max(0.0).sqrt(), d2.max(0.0).sqrt()).to_dense());
        prev = *v;
    }
    let last = q.values().last().unwrap();
    let last_dense = PermMatrix::new(d, last[0], last[1]).to_dense();
    let problem = CascadeProblem::new(q.grid(), increments, &last_dense, p1);
    run(&problem, quad)
}

/// `psi` of the diagonal embedding `p id_D`. Product measures factor into D
/// independent one-dimensional cascades when the fast path is enabled.
pub fn psi_scalar(p: &ScalarPath, p1: &SpinMeasure, quad: &QuadratureConfig) -> Result<CascadeResult> {
    let d = p1.dimension();
    if quad.product_fast_path && d > 1 {
        if let Some(_marginals) = p1.as_product() {
            let mut value = 0.0;
            let mut err = 0.0;
            let mut levels = Vec::new();
            for dim in 0..d {
                let marginal = p1.marginal(dim)?;
                let res = psi_scalar_1d(p, &marginal, quad)?;
                value += res.value;
                err += res.quad_error;
                if dim == 0 {
                    levels = res.levels;
                }
            }
            return Ok(CascadeResult {
                value,
                quad_error: err,
                levels,
            });
        }
    }
    psi(&MatrixPath::diag_embed(p, d), p1, quad)
}

fn psi_scalar_1d(p: &ScalarPath, marginal: &SpinMeasure, quad: &QuadratureConfig) -> Result<CascadeResult> {
    psi(&MatrixPath::diag_embed(p, 1), marginal, quad)
}

/// Finitely supported probability measure on the nonnegative half-line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    /// Sorted `(position, weight)` atoms with positive weights summing to 1.
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<DiscreteMeasure> {
        if atoms.is_empty() {
            return Err(Error::InvalidConfig("measure needs at least one atom".into()));
        }
        for &(x, w) in &atoms {
            if x < 0.0 || !x.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "atom position {x} outside the nonnegative half-line"
                )));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidConfig("atom weights must be positive".into()));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some((mx, mw)) if (*mx - x).abs() <= 1e-14 => *mw += w,
                _ => merged.push((x, w)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "atom weights sum to {total}, expected 1"
            )));
        }
        for (_, w) in &mut merged {
            *w /= total;
        }
        Ok(DiscreteMeasure { atoms: merged })
    }

    pub fn dirac(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(vec![(x, 1.0)]).expect("dirac is valid")
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// The induced measure `Law(p(U))` of a monotone step path.
    pub fn from_path(p: &ScalarPath) -> DiscreteMeasure {
        let atoms: Vec<(f64, f64)> = p
            .grid()
            .windows(2)
            .zip(p.values())
            .map(|(w, &v)| (v, w[1] - w[0]))
            .collect();
        DiscreteMeasure::new(atoms).expect("step path induces a valid measure")
    }

    /// Convex mixture `(1 - lambda) self + lambda other`.
    pub fn mix(&self, other: &DiscreteMeasure, lambda: f64) -> Result<DiscreteMeasure> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!(
                "mixture parameter {lambda} outside [0, 1]"
            )));
        }
        let mut atoms = Vec::new();
        if lambda < 1.0 {
            atoms.extend(self.atoms.iter().map(|&(x, w)| (x, w * (1.0 - lambda))));
        }
        if lambda > 0.0 {
            atoms.extend(other.atoms.iter().map(|&(x, w)| (x, w * lambda)));
        }
        DiscreteMeasure::new(atoms)
    }

    /// Wasserstein-1 distance: the L1 distance of quantile paths.
    pub fn wasserstein1(&self, other: &DiscreteMeasure) -> f64 {
        quantile_path(self).l1_distance(&quantile_path(other))
    }
}

/// The right-continuous quantile function
/// `p_mu(u) = inf { x >= 0 : mu([0, x]) > u }` as a step path; exact for
/// atoms, and the induced measure of the result is `mu`.
pub fn quantile_path(mu: &DiscreteMeasure) -> ScalarPath {
    let mut grid = Vec::with_capacity(mu.atoms.len() + 1);
    let mut values = Vec::with_capacity(mu.atoms.len());
    grid.push(0.0);
    let mut cum = 0.0;
    for (i, &(x, w)) in mu.atoms.iter().enumerate() {
        cum += w;
        let edge = if i + 1 == mu.atoms.len() { 1.0 } else { cum };
        // Zero-width levels cannot arise: merged atoms have positive weight.
        grid.push(edge);
        values.push(x);
    }
    ScalarPath::new(grid, values).expect("quantile path of a valid measure")
}

/// Midpoint strict-concavity probe for `mu -> psi(diag quantile(mu))`.
#[derive(Debug, Clone, Serialize)]
pub struct ConcavityReport {
    /// `(lambda, value, quadrature error)` along the requested grid.
    pub evaluations: Vec<(f64, f64, f64)>,
    /// `g(1/2) - (g(0) + g(1)) / 2`; strictly positive for distinct
    /// endpoint measures.
    pub midpoint_defect: f64,
    /// Accumulated quadrature error of the defect.
    pub defect_error: f64,
}

pub fn concavity_probe(
    p1: &SpinMeasure,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    lambdas: &[f64],
    quad: &QuadratureConfig,
) -> Result<ConcavityReport> {
    let g = |lambda: f64| -> Result<(f64, f64)> {
        let mu = mu0.mix(mu1, lambda)?;
        let res = psi_scalar(&quantile_path(&mu), p1, quad)?;
        Ok((res.value, res.quad_error))
    };
    let mut evaluations = Vec::new();
    for &lambda in lambdas {
        let (v, e) = g(lambda)?;
        evaluations.push((lambda, v, e));
    }
    let (g0, e0) = g(0.0)?;
    let (gh, eh) = g(0.5)?;
    let (g1, e1) = g(1.0)?;
    Ok(ConcavityReport {
        evaluations,
        midpoint_defect: gh - 0.5 * (g0 + g1),
        defect_error: eh + 0.5 * (e0 + e1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn ising_1d() -> SpinMeasure {
        presets::sk().measure
    }

    #[test]
    fn psi_of_zero_path_is_zero() {
        let p1 = ising_1d();
        let quad = QuadratureConfig::tensor(16);
        let res = psi_scalar(&ScalarPath::zero(), &p1, &quad).unwrap();
        assert!(res.value.abs() < 1e-12);
    }

    /// Closed form for D = 1 signs and a constant path:
    /// `psi = p - E log cosh(sqrt(2 p) Z)`, the expectation by composite
    /// Simpson over [-12, 12] (independent of the Hermite machinery).
    fn closed_form_constant(p: f64) -> f64 {
        let a = (2.0 * p).sqrt();
        let n = 100_001usize;
        let (lo, hi) = (-12.0f64, 12.0);
        let h = (hi - lo) / (n - 1) as f64;
        let density = |z: f64| (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let f = |z: f64| density(z) * (a * z).cosh().ln();
        let mut acc = f(lo) + f(hi);
        for i in 1..n - 1 {
            let z = lo + i as f64 * h;
            acc += f(z) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        p - acc * h / 3.0
    }

    #[test]
    fn constant_path_matches_closed_form() {
        let p1 = ising_1d();
        let quad = QuadratureConfig::tensor(32);
        for p in [0.1, 0.5, 1.0] {
            let res = psi_scalar(&ScalarPath::constant(p), &p1, &quad).unwrap();
            let expected = closed_form_constant(p);
            assert!(
                (res.value - expected).abs() <= res.quad_error + 1e-11,
                "p={p}: {} vs {expected} (self-reported error {:.3e})",
                res.value,
                res.quad_error
            );
        }
    }

    #[test]
    fn level_merge_invariance() {
        let p1 = ising_1d();
        let quad = QuadratureConfig::tensor(16);
        let base = ScalarPath::new(vec![0.0, 0.4, 1.0], vec![0.3, 0.9]).unwrap();
        let split = ScalarPath::new(vec![0.0, 0.2, 0.4, 1.0], vec![0.3, 0.3, 0.9]).unwrap();
        let a = psi_scalar(&base, &p1, &quad).unwrap().value;
        let b = psi_scalar(&split, &p1, &quad).unwrap().value;
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn monte_carlo_agrees_with_tensor() {
        let p1 = ising_1d();
        let path = ScalarPath::new(vec![0.0, 0.5, 1.0], vec![0.2, 0.7]).unwrap();
        let tensor = psi_scalar(&path, &p1, &QuadratureConfig::tensor(24)).unwrap();
        let mc = psi_scalar(&path, &p1, &QuadratureConfig::monte_carlo(200_000, 11)).unwrap();
        assert!(
            (tensor.value - mc.value).abs() < 0.01,
            "tensor {} vs mc {} (err {})",
            tensor.value,
            mc.value,
            mc.quad_error
        );
    }

    #[test]
    fn mc_is_seed_deterministic() {
        let p1 = ising_1d();
        let path = ScalarPath::constant(0.4);
        let a = psi_scalar(&path, &p1, &QuadratureConfig::monte_carlo(20_000, 5)).unwrap();
        let b = psi_scalar(&path, &p1, &QuadratureConfig::monte_carlo(20_000, 5)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn pair_path_matches_dense_matrix_path() {
        let model = presets::bp_sk(1.5);
        let q = PairPath::new(vec![0.0, 0.5, 1.0], vec![[0.1, 0.2], [0.3, 0.5]]).unwrap();
        let quad = QuadratureConfig::tensor(10);
        let via_pair = psi_pair(&q, 2, &model.measure, &quad).unwrap();
        let via_dense = psi(&q.perp_lift(2), &model.measure, &quad).unwrap();
        assert!((via_pair.value - via_dense.value).abs() < 1e-9);
    }

    #[test]
    fn product_fast_path_matches_dense() {
        let model = presets::bp_sk(1.0);
        let p = ScalarPath::new(vec![0.0, 0.6, 1.0], vec![0.15, 0.45]).unwrap();
        let mut quad = QuadratureConfig::tensor(10);
        let fast = psi_scalar(&p, &model.measure, &quad).unwrap();
        quad.product_fast_path = false;
        let dense = psi_scalar(&p, &model.measure, &quad).unwrap();
        assert!(
            (fast.value - dense.value).abs() < 1e-8,
            "fast {} vs dense {}",
            fast.value,
            dense.value
        );
    }

    #[test]
    fn quantile_path_round_trips() {
        let mu = DiscreteMeasure::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let p = quantile_path(&mu);
        assert_eq!(p.grid(), &[0.0, 0.5, 1.0]);
        assert_eq!(p.values(), &[0.0, 1.0]);
        assert_eq!(DiscreteMeasure::from_path(&p), mu);

        let dirac = DiscreteMeasure::dirac(0.7);
        let p = quantile_path(&dirac);
        assert_eq!(p.values(), &[0.7]);

        let mu = DiscreteMeasure::new(vec![(0.2, 0.25), (0.5, 0.35), (0.9, 0.4)]).unwrap();
        assert_eq!(DiscreteMeasure::from_path(&quantile_path(&mu)), mu);
    }

    #[test]
    fn wasserstein_of_diracs_is_distance() {
        let a = DiscreteMeasure::dirac(0.2);
        let b = DiscreteMeasure::dirac(0.8);
        assert!((a.wasserstein1(&b) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn concavity_probe_signs() {
        let p1 = ising_1d();
        let quad = QuadratureConfig::tensor(16);
        let mu0 = DiscreteMeasure::dirac(0.2);
        let mu1 = DiscreteMeasure::dirac(0.8);
        // Identical endpoints: defect 0.
        let same = concavity_probe(&p1, &mu0, &mu0, &[], &quad).unwrap();
        assert!(same.midpoint_defect.abs() < 1e-12);
        // Distinct endpoints: strictly positive defect, symmetric in the
        // endpoints.
        let fwd = concavity_probe(&p1, &mu0, &mu1, &[], &quad).unwrap();
        let bwd = concavity_probe(&p1, &mu1, &mu0, &[], &quad).unwrap();
        assert!(fwd.midpoint_defect > 2.0 * fwd.defect_error.max(1e-12));
        assert!((fwd.midpoint_defect - bwd.midpoint_defect).abs() < 1e-10);
    }

    #[test]
    fn lipschitz_in_l1() {
        let p1 = ising_1d();
        let quad = QuadratureConfig::tensor(24);
        let a = ScalarPath::new(vec![0.0, 0.3, 1.0], vec![0.2, 0.8]).unwrap();
        let b = ScalarPath::new(vec![0.0, 0.6, 1.0], vec![0.1, 1.1]).unwrap();
        let va = psi_scalar(&a, &p1, &quad).unwrap();
        let vb = psi_scalar(&b, &p1, &quad).unwrap();
        let dist = MatrixPath::diag_embed(&a, 1).l1_distance(&MatrixPath::diag_embed(&b, 1));
        assert!((va.value - vb.value).abs() <= dist + va.quad_error + vb.quad_error + 1e-12);
    }

    #[test]
    fn monotone_in_the_path() {
        let p1 = ising_1d();
        let quad = QuadratureConfig::tensor(24);
        let lo = ScalarPath::new(vec![0.0, 0.5, 1.0], vec![0.1, 0.4]).unwrap();
        let hi = ScalarPath::new(vec![0.0, 0.5, 1.0], vec![0.3, 0.9]).unwrap();
        let va = psi_scalar(&lo, &p1, &quad).unwrap().value;
        let vb = psi_scalar(&hi, &p1, &quad).unwrap().value;
        assert!(vb >= va - 1e-10);
    }
}
