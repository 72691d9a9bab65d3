//! Variational objectives over K-level step paths and their maximization.
//!
//! Three reductions of the same limit free energy:
//!
//! * `scalar` — diagonal permutation-invariant models, paths on `R_+`:
//!   `psi(p id_D) - t sum dz (xi_dagger(./D))*(p_l / t)`;
//! * `pair` — permutation-invariant models, paths in eigenvalue
//!   coordinates: `psi(m(p1, p2)) - t sum dz xi_perp*(p_l / t)`, the closed
//!   form of the Hopf-Lax inner infimum;
//! * `matrix` — dense PSD paths at D = 2 with dense conjugation, kept as a
//!   validation route for the reduction identities.
//!
//! The optimizer is a multistart adaptive simplex over a strictly-positive
//! reparametrization (squared increments, normalized exponential grid
//! gaps), so every iterate is a feasible monotone path.

mod optimize;

pub use optimize::{nelder_mead, SimplexOpts};

use crate::cascade::{psi, psi_pair, psi_scalar, DiscreteMeasure, QuadratureConfig};
use crate::conjugate::{
    conjugate_scalar, xi_dagger_scaled_star, xi_perp_star, xi_star_psd, ConjugateConfig, PsdPoint,
};
use crate::model::{CovarianceSpec, ModelInstance};
use crate::paths::{MatrixPath, PairPath, ScalarPath};
use crate::rng::{derive_rng, tags};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Scalar,
    Pair,
    Matrix,
}

impl std::str::FromStr for Reduction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Reduction> {
        match s {
            "scalar" => Ok(Reduction::Scalar),
            "pair" => Ok(Reduction::Pair),
            "matrix" => Ok(Reduction::Matrix),
            other => Err(Error::InvalidConfig(format!(
                "unknown reduction '{other}' (expected scalar, pair or matrix)"
            ))),
        }
    }
}

/// A fully validated objective: model, reduction, level count and numerics.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub model: ModelInstance,
    pub reduction: Reduction,
    pub levels: usize,
    pub quad: QuadratureConfig,
    pub conj: ConjugateConfig,
}

impl ObjectiveSpec {
    pub fn new(
        model: ModelInstance,
        reduction: Reduction,
        levels: usize,
        quad: QuadratureConfig,
        conj: ConjugateConfig,
    ) -> Result<ObjectiveSpec> {
        if levels == 0 {
            return Err(Error::InvalidConfig("levels must be >= 1".into()));
        }
        if model.covariance.formal() {
            return Err(Error::FormalSpecRejected);
        }
        let invariant = model.covariance.check_permutation_invariance().invariant
            && model.measure.is_permutation_invariant(1e-9);
        match reduction {
            Reduction::Scalar => {
                if !model.covariance.diagonal_only() {
                    return Err(Error::NotDiagonal);
                }
                if !invariant {
                    return Err(Error::InvalidConfig(
                        "scalar reduction requires a permutation-invariant model".into(),
                    ));
                }
            }
            Reduction::Pair => {
                if model.dimension() < 2 {
                    return Err(Error::ScalarModelRejected);
                }
                if !invariant {
                    return Err(Error::InvalidConfig(
                        "pair reduction requires a permutation-invariant model".into(),
                    ));
                }
            }
            Reduction::Matrix => {
                if model.dimension() != 2 {
                    return Err(Error::InvalidConfig(
                        "dense matrix reduction is implemented for D = 2 only".into(),
                    ));
                }
            }
        }
        Ok(ObjectiveSpec {
            model,
            reduction,
            levels,
            quad,
            conj,
        })
    }

    /// Objective spec with the quadrature sized automatically for the
    /// reduction's Gaussian dimension count.
    pub fn with_auto_quad(
        model: ModelInstance,
        reduction: Reduction,
        levels: usize,
        seed: u64,
        conj: ConjugateConfig,
    ) -> Result<ObjectiveSpec> {
        let dims = gauss_dims(&model, reduction, levels);
        ObjectiveSpec::new(model, reduction, levels, QuadratureConfig::auto(dims, seed), conj)
    }

    fn require_positive_t(&self) -> Result<f64> {
        if self.model.t > 0.0 {
            Ok(self.model.t)
        } else {
            Err(Error::InvalidConfig(
                "objectives need t > 0 (the t = 0 optimum is the zero path with value 0)".into(),
            ))
        }
    }

    /// `psi(p id_D) - t sum dz (xi_dagger(./D))*(p_l / t)`.
    pub fn objective_scalar(&self, p: &ScalarPath) -> Result<f64> {
        Ok(self.objective_scalar_quad(p, &self.quad)?.0)
    }

    fn objective_scalar_quad(&self, p: &ScalarPath, quad: &QuadratureConfig) -> Result<(f64, f64)> {
        let t = self.require_positive_t()?;
        let cascade = psi_scalar(p, &self.model.measure, quad)?;
        let mut conj_term = 0.0;
        for (w, &v) in p.grid().windows(2).zip(p.values()) {
            conj_term += (w[1] - w[0])
                * xi_dagger_scaled_star(&self.model.covariance, v / t, &self.conj)?.value;
        }
        Ok((cascade.value - t * conj_term, cascade.quad_error))
    }

    /// `psi(m(p1, p2)) - t sum dz xi_perp*(p_l / t)`.
    pub fn objective_pair(&self, q: &PairPath) -> Result<f64> {
        Ok(self.objective_pair_quad(q, &self.quad)?.0)
    }

    fn objective_pair_quad(&self, q: &PairPath, quad: &QuadratureConfig) -> Result<(f64, f64)> {
        let t = self.require_positive_t()?;
        let d = self.model.dimension();
        let cascade = psi_pair(q, d, &self.model.measure, quad)?;
        let mut conj_term = 0.0;
        for (w, v) in q.grid().windows(2).zip(q.values()) {
            conj_term += (w[1] - w[0])
                * xi_perp_star(&self.model.covariance, v[0] / t, v[1] / t, &self.conj)?.value;
        }
        Ok((cascade.value - t * conj_term, cascade.quad_error))
    }

    /// `psi(q) - t sum dz xi*(q_l / t)` with dense conjugation (D = 2).
    pub fn objective_matrix(&self, q: &MatrixPath) -> Result<f64> {
        Ok(self.objective_matrix_quad(q, &self.quad)?.0)
    }

    fn objective_matrix_quad(&self, q: &MatrixPath, quad: &QuadratureConfig) -> Result<(f64, f64)> {
        let t = self.require_positive_t()?;
        let cascade = psi(q, &self.model.measure, quad)?;
        let mut conj_term = 0.0;
        for (w, v) in q.grid().windows(2).zip(q.values().iter()) {
            let scaled = v / t;
            conj_term += (w[1] - w[0])
                * xi_star_psd(&self.model.covariance, &PsdPoint::Dense(scaled), &self.conj)?.value;
        }
        Ok((cascade.value - t * conj_term, cascade.quad_error))
    }

    pub fn objective(&self, path: &AnyPath) -> Result<f64> {
        match (self.reduction, path) {
            (Reduction::Scalar, AnyPath::Scalar(p)) => self.objective_scalar(p),
            (Reduction::Pair, AnyPath::Pair(p)) => self.objective_pair(p),
            (Reduction::Matrix, AnyPath::Matrix(p)) => self.objective_matrix(p),
            _ => Err(Error::InvalidConfig(
                "path kind does not match the reduction".into(),
            )),
        }
    }

    fn objective_quad(&self, path: &AnyPath, quad: &QuadratureConfig) -> Result<(f64, f64)> {
        match (self.reduction, path) {
            (Reduction::Scalar, AnyPath::Scalar(p)) => self.objective_scalar_quad(p, quad),
            (Reduction::Pair, AnyPath::Pair(p)) => self.objective_pair_quad(p, quad),
            (Reduction::Matrix, AnyPath::Matrix(p)) => self.objective_matrix_quad(p, quad),
            _ => Err(Error::InvalidConfig(
                "path kind does not match the reduction".into(),
            )),
        }
    }
}

/// Gaussian dimension count seen by the cascade for a reduction.
pub fn gauss_dims(model: &ModelInstance, reduction: Reduction, levels: usize) -> usize {
    match reduction {
        Reduction::Scalar => {
            if model.measure.as_product().is_some() {
                levels
            } else {
                model.dimension() * levels
            }
        }
        Reduction::Pair | Reduction::Matrix => model.dimension() * levels,
    }
}

/// A path in any of the three cone representations.
#[derive(Debug, Clone)]
pub enum AnyPath {
    Scalar(ScalarPath),
    Pair(PairPath),
    Matrix(MatrixPath),
}

impl AnyPath {
    pub fn l1_distance(&self, other: &AnyPath) -> f64 {
        match (self, other) {
            (AnyPath::Scalar(a), AnyPath::Scalar(b)) => a.l1_distance(b),
            (AnyPath::Pair(a), AnyPath::Pair(b)) => a.l1_distance(b),
            (AnyPath::Matrix(a), AnyPath::Matrix(b)) => a.l1_distance(b),
            _ => f64::NAN,
        }
    }

    pub fn grid(&self) -> &[f64] {
        match self {
            AnyPath::Scalar(p) => p.grid(),
            AnyPath::Pair(p) => p.grid(),
            AnyPath::Matrix(p) => p.grid(),
        }
    }

    /// Point list of the path values, one row per level.
    pub fn value_rows(&self) -> Vec<Vec<f64>> {
        match self {
            AnyPath::Scalar(p) => p.values().iter().map(|&v| vec![v]).collect(),
            AnyPath::Pair(p) => p.values().iter().map(|v| vec![v[0], v[1]]).collect(),
            AnyPath::Matrix(p) => p
                .values()
                .iter()
                .map(|m| m.iter().copied().collect())
                .collect(),
        }
    }

    /// The induced measure `Law(path(U))`: weights are grid gaps, adjacent
    /// equal values merged.
    pub fn induced_measure(&self) -> InducedMeasure {
        let rows = self.value_rows();
        let grid = self.grid();
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (w, row) in grid.windows(2).zip(rows) {
            let gap = w[1] - w[0];
            match points.last() {
                Some(last)
                    if last.len() == row.len()
                        && last
                            .iter()
                            .zip(&row)
                            .all(|(a, b)| (a - b).abs() <= 1e-12) =>
                {
                    *weights.last_mut().unwrap() += gap;
                }
                _ => {
                    points.push(row);
                    weights.push(gap);
                }
            }
        }
        InducedMeasure { points, weights }
    }
}

/// Discrete measure `Law(p*(U))` attached to an optimization result.
#[derive(Debug, Clone, Serialize)]
pub struct InducedMeasure {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl InducedMeasure {
    /// Flattened support for deterministic tie-breaking.
    fn support_key(&self) -> Vec<f64> {
        let mut key: Vec<f64> = Vec::new();
        for (p, w) in self.points.iter().zip(&self.weights) {
            key.extend_from_slice(p);
            key.push(*w);
        }
        key
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOpts {
    pub restarts: usize,
    /// Level counts to sweep (warm-starting each from the previous best);
    /// empty means: start at the objective's level count and double while
    /// the gain exceeds `value_tol` (up to 4 doublings).
    pub k_schedule: Vec<usize>,
    /// Simplex diameter tolerance.
    pub step_tol: f64,
    /// Gain threshold for K escalation and the top-restart window.
    pub value_tol: f64,
    pub rng_seed: u64,
    /// Simplex iteration budget per restart.
    pub max_iters: usize,
    /// Tensor nodes used during the search phase (final values are always
    /// re-evaluated at the objective's own quadrature).
    pub search_nodes: Option<usize>,
}

impl Default for OptimizeOpts {
    fn default() -> Self {
        OptimizeOpts {
            restarts: 8,
            k_schedule: Vec::new(),
            step_tol: 1e-9,
            value_tol: 1e-9,
            rng_seed: 0,
            max_iters: 4000,
            search_nodes: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartOutcome {
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
    #[serde(skip)]
    pub path: Option<AnyPath>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeTrace {
    pub k_schedule: Vec<usize>,
    pub value_cap: f64,
    pub search_nodes: usize,
    pub total_evals: usize,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub best_path: AnyPath,
    /// Objective at the best path under the full quadrature.
    pub value: f64,
    /// Quadrature error estimate of the final evaluation.
    pub quad_error: f64,
    /// Per-restart outcomes of the final level stage (search quadrature).
    pub restarts: Vec<RestartOutcome>,
    pub induced_measure: InducedMeasure,
    /// Max pairwise L1 path distance among restarts whose value is within
    /// the tolerance window of the best; for scalar paths this is the
    /// Wasserstein-1 spread of the induced measures.
    pub spread: f64,
    /// Max - min of restart values (search quadrature).
    pub value_spread: f64,
    pub trace: OptimizeTrace,
}

/// Strictly-positive reparametrization of K-level paths: K-1 grid logits
/// (exponentiated, normalized, last gap pinned) and squared value
/// increments per component, clamped at the truncation cap.
#[derive(Debug, Clone, Copy)]
struct ParamMap {
    reduction: Reduction,
    k: usize,
    dim: usize,
    cap: f64,
}

impl ParamMap {
    fn n_params(&self) -> usize {
        let per_level = match self.reduction {
            Reduction::Scalar => 1,
            Reduction::Pair => 2,
            Reduction::Matrix => 3,
        };
        (self.k - 1) + self.k * per_level
    }

    fn grid(&self, theta: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut gaps = Vec::with_capacity(k);
        for l in 0..k - 1 {
            gaps.push(theta[l].clamp(-12.0, 12.0).exp() + 1e-6);
        }
        gaps.push(1.0);
        let total: f64 = gaps.iter().sum();
        let mut grid = Vec::with_capacity(k + 1);
        grid.push(0.0);
        let mut acc = 0.0;
        for gap in gaps.iter().take(k - 1) {
            acc += gap;
            grid.push(acc / total);
        }
        grid.push(1.0);
        grid
    }

    fn decode(&self, theta: &[f64]) -> AnyPath {
        let k = self.k;
        let grid = self.grid(theta);
        let vals = &theta[k - 1..];
        match self.reduction {
            Reduction::Scalar => {
                let mut acc = 0.0;
                let values = (0..k)
                    .map(|l| {
                        acc += vals[l] * vals[l];
                        acc.min(self.cap)
                    })
                    .collect();
                AnyPath::Scalar(ScalarPath::new(grid, values).expect("feasible by construction"))
            }
            Reduction::Pair => {
                let mut acc = [0.0f64; 2];
                let values = (0..k)
                    .map(|l| {
                        acc[0] += vals[2 * l] * vals[2 * l];
                        acc[1] += vals[2 * l + 1] * vals[2 * l + 1];
                        [acc[0].min(self.cap), acc[1].min(self.cap)]
                    })
                    .collect();
                AnyPath::Pair(PairPath::new(grid, values).expect("feasible by construction"))
            }
            Reduction::Matrix => {
                let d = self.dim;
                // Trace box; increments shrink toward it so the cumulative
                // values stay monotone.
                let bound = 2.0 * self.cap * d as f64;
                let mut acc = DMatrix::<f64>::zeros(d, d);
                let values = (0..k)
                    .map(|l| {
                        let (a, b, c) = (vals[3 * l], vals[3 * l + 1], vals[3 * l + 2]);
                        // Cholesky-style factor keeps increments PSD.
                        let mut incr = DMatrix::from_row_slice(
                            2,
                            2,
                            &[a * a, a * b, a * b, b * b + c * c],
                        );
                        let room = bound - acc.trace();
                        let t_incr = incr.trace();
                        if t_incr > room {
                            incr *= (room / t_incr).max(0.0);
                        }
                        acc += incr;
                        acc.clone()
                    })
                    .collect();
                AnyPath::Matrix(
                    MatrixPath::new(grid, values).expect("feasible by construction"),
                )
            }
        }
    }

    fn encode(&self, path: &AnyPath) -> Vec<f64> {
        let grid = path.grid();
        let k = self.k;
        assert_eq!(grid.len(), k + 1, "encode expects a path at this K");
        let mut theta = Vec::with_capacity(self.n_params());
        let last_gap = grid[k] - grid[k - 1];
        for l in 0..k - 1 {
            let gap = grid[l + 1] - grid[l];
            theta.push((gap / last_gap).max(1e-12).ln());
        }
        match (self.reduction, path) {
            (Reduction::Scalar, AnyPath::Scalar(p)) => {
                let mut prev = 0.0;
                for &v in p.values() {
                    theta.push((v - prev).max(0.0).sqrt());
                    prev = v;
                }
            }
            (Reduction::Pair, AnyPath::Pair(p)) => {
                let mut prev = [0.0f64; 2];
                for v in p.values() {
                    theta.push((v[0] - prev[0]).max(0.0).sqrt());
                    theta.push((v[1] - prev[1]).max(0.0).sqrt());
                    prev = *v;
                }
            }
            (Reduction::Matrix, AnyPath::Matrix(p)) => {
                let mut prev = DMatrix::<f64>::zeros(2, 2);
                for v in p.values() {
                    let incr = v - &prev;
                    // Cholesky of the (clipped) PSD increment.
                    let a = incr[(0, 0)].max(0.0).sqrt();
                    let b = if a > 1e-12 { incr[(0, 1)] / a } else { 0.0 };
                    let c = (incr[(1, 1)] - b * b).max(0.0).sqrt();
                    theta.push(a);
                    theta.push(b);
                    theta.push(c);
                    prev = v.clone();
                }
            }
            _ => unreachable!("path kind matches the map"),
        }
        theta
    }
}

/// Splits every level in two (same value on both halves); the objective is
/// unchanged by level merging, so this is a warm start for a doubled K.
fn split_levels(path: &AnyPath) -> AnyPath {
    fn split_grid(grid: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.len() * 2 - 1);
        for w in grid.windows(2) {
            out.push(w[0]);
            out.push(0.5 * (w[0] + w[1]));
        }
        out.push(1.0);
        out
    }
    match path {
        AnyPath::Scalar(p) => {
            let values: Vec<f64> = p.values().iter().flat_map(|&v| [v, v]).collect();
            AnyPath::Scalar(ScalarPath::new(split_grid(p.grid()), values).unwrap())
        }
        AnyPath::Pair(p) => {
            let values: Vec<[f64; 2]> = p.values().iter().flat_map(|&v| [v, v]).collect();
            AnyPath::Pair(PairPath::new(split_grid(p.grid()), values).unwrap())
        }
        AnyPath::Matrix(p) => {
            let values: Vec<DMatrix<f64>> = p
                .values()
                .iter()
                .flat_map(|v| [v.clone(), v.clone()])
                .collect();
            AnyPath::Matrix(MatrixPath::new(split_grid(p.grid()), values).unwrap())
        }
    }
}

fn zero_path(reduction: Reduction, dim: usize) -> AnyPath {
    match reduction {
        Reduction::Scalar => AnyPath::Scalar(ScalarPath::zero()),
        Reduction::Pair => AnyPath::Pair(PairPath::zero()),
        Reduction::Matrix => AnyPath::Matrix(MatrixPath::zero(dim)),
    }
}

fn search_nodes_default(gauss_dims: usize) -> usize {
    match gauss_dims {
        0..=1 => 24,
        2 => 16,
        3 => 12,
        4 => 8,
        5 => 6,
        6 => 5,
        _ => 4,
    }
}

/// Maximizes the selected objective over K-level step paths.
pub fn maximize(spec: &ObjectiveSpec, opts: &OptimizeOpts) -> Result<OptimizeResult> {
    let t = spec.model.t;
    if t == 0.0 {
        // The t = 0 objective is psi - (conjugate term that blows up for
        // any nonzero path); the optimum is the zero path with value 0.
        let path = zero_path(spec.reduction, spec.model.dimension());
        return Ok(OptimizeResult {
            induced_measure: path.induced_measure(),
            best_path: path.clone(),
            value: 0.0,
            quad_error: 0.0,
            restarts: vec![RestartOutcome {
                value: 0.0,
                evals: 0,
                converged: true,
                path: Some(path),
            }],
            spread: 0.0,
            value_spread: 0.0,
            trace: OptimizeTrace {
                k_schedule: vec![spec.levels],
                value_cap: 0.0,
                search_nodes: 0,
                total_evals: 0,
            },
        });
    }

    let cap = search_cap(&spec.model, t, &spec.conj)?;
    let schedule: Vec<usize> = if opts.k_schedule.is_empty() {
        vec![spec.levels]
    } else {
        opts.k_schedule.clone()
    };
    let auto_escalate = opts.k_schedule.is_empty();

    let mut warm: Option<AnyPath> = None;
    let mut last_best_value = f64::NEG_INFINITY;
    let mut total_evals = 0usize;
    // Outcomes of the best stage seen so far (stages are monotone when a
    // warm-start restart is available, but keep the max regardless).
    let mut stage_result: Option<(Vec<(RestartOutcome, Vec<f64>)>, usize)> = None;
    let mut k_history = Vec::new();
    let mut search_nodes_used = 0usize;

    let mut stage_idx = 0usize;
    let mut k_current = schedule[0];
    loop {
        let k = k_current;
        k_history.push(k);
        let map = ParamMap {
            reduction: spec.reduction,
            k,
            dim: spec.model.dimension(),
            cap,
        };
        let dims = gauss_dims(&spec.model, spec.reduction, k);
        let search_quad = match spec.quad.mode {
            crate::cascade::QuadMode::TensorHermite { .. } => {
                let nodes = opts.search_nodes.unwrap_or_else(|| search_nodes_default(dims));
                search_nodes_used = nodes;
                QuadratureConfig {
                    mode: crate::cascade::QuadMode::TensorHermite { nodes },
                    rng_seed: spec.quad.rng_seed,
                    product_fast_path: spec.quad.product_fast_path,
                    error_estimate: false,
                }
            }
            crate::cascade::QuadMode::MonteCarlo { samples } => QuadratureConfig {
                mode: crate::cascade::QuadMode::MonteCarlo {
                    samples: (samples / 4).max(10_000),
                },
                ..spec.quad
            },
        };

        // The warm start only applies when its level count matches this K.
        let warm_theta = warm
            .as_ref()
            .filter(|p| p.grid().len() == k + 1)
            .map(|p| map.encode(p));
        let outcomes: Vec<(RestartOutcome, Vec<f64>)> = (0..opts.restarts)
            .into_par_iter()
            .map(|r| {
                let theta0 = initial_theta(spec, &map, opts.rng_seed, k, r, warm_theta.as_deref());
                run_restart(spec, &map, &search_quad, theta0, opts)
            })
            .collect();
        total_evals += outcomes.iter().map(|(o, _)| o.evals).sum::<usize>();

        let best_idx = select_best(&outcomes);
        let best_value = outcomes[best_idx].0.value;
        let best_path = outcomes[best_idx].0.path.clone().unwrap();
        let improved = best_value > last_best_value + opts.value_tol;
        warm = Some(split_levels(&best_path));
        if best_value > last_best_value || stage_result.is_none() {
            stage_result = Some((outcomes, best_idx));
        }
        last_best_value = last_best_value.max(best_value);

        stage_idx += 1;
        if auto_escalate {
            // Double K while the value keeps improving, up to 4 doublings.
            if stage_idx >= 5 || (stage_idx >= 2 && !improved) {
                break;
            }
            k_current = k * 2;
        } else {
            if stage_idx >= schedule.len() {
                break;
            }
            k_current = schedule[stage_idx];
        }
    }

    let (outcomes, best_idx) = stage_result.unwrap();
    let best_path = outcomes[best_idx].0.path.clone().unwrap();
    let best_search_value = outcomes[best_idx].0.value;

    // Final high-accuracy evaluation of the winning path.
    let (value, quad_error) = spec.objective_quad(&best_path, &spec.quad)?;

    // Spread among restarts close to the best (search values).
    let window = opts.value_tol.max(1e-7);
    let mut spread = 0.0f64;
    let top: Vec<&AnyPath> = outcomes
        .iter()
        .filter(|(o, _)| o.value >= best_search_value - window)
        .filter_map(|(o, _)| o.path.as_ref())
        .collect();
    for i in 0..top.len() {
        for j in i + 1..top.len() {
            spread = spread.max(top[i].l1_distance(top[j]));
        }
    }
    let values: Vec<f64> = outcomes.iter().map(|(o, _)| o.value).collect();
    let value_spread = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - values.iter().fold(f64::INFINITY, |a, &b| a.min(b));

    Ok(OptimizeResult {
        induced_measure: best_path.induced_measure(),
        best_path,
        value,
        quad_error,
        restarts: outcomes.into_iter().map(|(o, _)| o).collect(),
        spread,
        value_spread,
        trace: OptimizeTrace {
            k_schedule: k_history,
            value_cap: cap,
            search_nodes: search_nodes_used,
            total_evals,
        },
    })
}

fn initial_theta(
    spec: &ObjectiveSpec,
    map: &ParamMap,
    seed: u64,
    k: usize,
    restart: usize,
    warm: Option<&[f64]>,
) -> Vec<f64> {
    // Restart 0: zero path. Restart 1: warm start when available.
    if restart == 0 {
        let mut theta = vec![0.0; map.n_params()];
        for g in theta.iter_mut().take(k - 1) {
            *g = 0.0;
        }
        return theta;
    }
    if restart == 1 {
        if let Some(w) = warm {
            if w.len() == map.n_params() {
                return w.to_vec();
            }
        }
    }
    let mut rng = derive_rng(seed, &[tags::OPTIMIZE, k as u64, restart as u64]);
    let mut theta = Vec::with_capacity(map.n_params());
    for _ in 0..k - 1 {
        theta.push(rng.gen_range(-0.7..0.7));
    }
    let per_level = map.n_params() - (k - 1);
    let scale = (map.cap.min(2.0 * spec.model.t.max(0.25)) / k as f64).sqrt();
    for _ in 0..per_level {
        theta.push(rng.gen_range(0.0..scale.max(0.05)));
    }
    theta
}

fn run_restart(
    spec: &ObjectiveSpec,
    map: &ParamMap,
    search_quad: &QuadratureConfig,
    theta0: Vec<f64>,
    opts: &OptimizeOpts,
) -> (RestartOutcome, Vec<f64>) {
    let mut objective = |theta: &[f64]| -> f64 {
        let path = map.decode(theta);
        match spec.objective_quad(&path, search_quad) {
            Ok((v, _)) => -v,
            Err(_) => f64::INFINITY,
        }
    };
    let coarse = nelder_mead(
        &mut objective,
        &theta0,
        &SimplexOpts {
            max_iters: opts.max_iters,
            x_tol: opts.step_tol,
            f_tol: 1e-13,
            scale: 0.35,
        },
    );
    // Polish with a tight simplex around the found point.
    let polish = nelder_mead(
        &mut objective,
        &coarse.x,
        &SimplexOpts {
            max_iters: opts.max_iters / 2,
            x_tol: opts.step_tol,
            f_tol: 1e-14,
            scale: 5e-3,
        },
    );
    let (theta, value, evals, converged) = if polish.value <= coarse.value {
        (
            polish.x,
            polish.value,
            coarse.evals + polish.evals,
            polish.converged,
        )
    } else {
        (
            coarse.x,
            coarse.value,
            coarse.evals + polish.evals,
            coarse.converged,
        )
    };
    let path = map.decode(&theta);
    (
        RestartOutcome {
            value: -value,
            evals,
            converged,
            path: Some(path),
        },
        theta,
    )
}

/// Index of the best restart: maximal value, ties resolved by the
/// lexicographically smallest induced-measure support.
fn select_best(outcomes: &[(RestartOutcome, Vec<f64>)]) -> usize {
    let mut best = 0usize;
    for i in 1..outcomes.len() {
        let (a, b) = (&outcomes[i].0, &outcomes[best].0);
        if a.value > b.value {
            best = i;
            continue;
        }
        if a.value == b.value {
            let ka = a.path.as_ref().unwrap().induced_measure().support_key();
            let kb = b.path.as_ref().unwrap().induced_measure().support_key();
            if ka
                .iter()
                .zip(&kb)
                .find_map(|(x, y)| match x.total_cmp(y) {
                    std::cmp::Ordering::Equal => None,
                    ord => Some(ord),
                })
                .unwrap_or(std::cmp::Ordering::Equal)
                == std::cmp::Ordering::Less
            {
                best = i;
            }
        }
    }
    best
}

/// `t * c` where `c` is the smallest point past which the scaled dagger
/// conjugate has slope-from-zero at least 1; path values are clamped there
/// during optimization. For non-diagonal models the diagonal restriction of
/// `xi_perp` stands in.
pub fn truncation_radius(spec: &CovarianceSpec, t: f64, conj: &ConjugateConfig) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let f_star: Box<dyn Fn(f64) -> Result<f64>> = if spec.diagonal_only() {
        let spec = spec.clone();
        let conj = conj.clone();
        Box::new(move |lambda| Ok(xi_dagger_scaled_star(&spec, lambda, &conj)?.value))
    } else {
        let spec = spec.clone();
        let conj = conj.clone();
        let min_degree = spec.min_degree();
        Box::new(move |lambda| {
            let f = |mu: f64| spec.xi_perp(mu, mu).expect("D >= 2 checked by caller") / 2.0;
            Ok(conjugate_scalar(&f, lambda, min_degree, &conj)?.value)
        })
    };
    let f0 = f_star(0.0)?;
    let slope = |lambda: f64| -> Result<f64> { Ok((f_star(lambda)? - f0) / lambda) };
    let mut hi = 0.0625f64;
    let mut found = false;
    while hi <= 1048576.0 {
        if slope(hi)? >= 1.0 {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if !found {
        return Err(Error::TruncationHit { radius: hi });
    }
    let mut lo = hi / 2.0;
    if hi <= 0.0625 {
        lo = 1e-9;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(t * hi)
}

fn search_cap(model: &ModelInstance, t: f64, conj: &ConjugateConfig) -> Result<f64> {
    let r = truncation_radius(&model.covariance, t, conj)?;
    // Scalar paths are clamped at the radius itself; pair and matrix
    // searches get a factor-2 box so the clamp cannot bind at the optimum.
    Ok(if model.covariance.diagonal_only() {
        r
    } else {
        2.0 * r
    })
}

/// The Hopf-Lax inner infimum evaluated two ways.
#[derive(Debug, Clone, Serialize)]
pub struct SupInfReport {
    /// `inf_r { -<p, r> + t ∫ xi_perp(r) }` by direct simplex minimization
    /// over monotone pair paths.
    pub direct_inner_inf: f64,
    /// `-t sum dz xi_perp*(p_l / t)`, the pointwise conjugate closed form.
    pub closed_form_inner_inf: f64,
    pub gap: f64,
}

/// Cross-checks the closed-form conjugate term of the pair objective
/// against a direct minimization over `k_inner`-level monotone paths. The
/// dual path lives on `p`'s grid when `k_inner` matches its level count,
/// otherwise on the uniform `k_inner` grid.
pub fn supinf_crosscheck(
    model: &ModelInstance,
    p: &PairPath,
    k_inner: usize,
    conj: &ConjugateConfig,
) -> Result<SupInfReport> {
    let t = model.t;
    if !(t > 0.0) {
        return Err(Error::InvalidConfig("supinf crosscheck needs t > 0".into()));
    }
    let spec = &model.covariance;
    let closed_form: f64 = {
        let mut acc = 0.0;
        for (w, v) in p.grid().windows(2).zip(p.values()) {
            acc += (w[1] - w[0]) * xi_perp_star(spec, v[0] / t, v[1] / t, conj)?.value;
        }
        -t * acc
    };

    let grid: Vec<f64> = if k_inner == p.levels() {
        p.grid().to_vec()
    } else {
        (0..=k_inner).map(|i| i as f64 / k_inner as f64).collect()
    };
    let k = grid.len() - 1;
    let objective = |theta: &[f64]| -> f64 {
        let mut acc = [0.0f64; 2];
        let mut values = Vec::with_capacity(k);
        for l in 0..k {
            acc[0] += theta[2 * l] * theta[2 * l];
            acc[1] += theta[2 * l + 1] * theta[2 * l + 1];
            values.push(acc);
        }
        let r = PairPath::new(grid.clone(), values).expect("feasible");
        let pairing = p.inner(&r);
        let mut integral = 0.0;
        for (w, v) in r.grid().windows(2).zip(r.values()) {
            integral += (w[1] - w[0]) * spec.xi_perp(v[0], v[1]).expect("D checked");
        }
        -pairing + t * integral
    };

    let mut best = f64::INFINITY;
    for attempt in 0..3u64 {
        let mut rng = derive_rng(17, &[tags::OPTIMIZE, 99, attempt]);
        let theta0: Vec<f64> = (0..2 * k)
            .map(|_| if attempt == 0 { 0.3 } else { rng.gen_range(0.0..1.0) })
            .collect();
        let mut f = |x: &[f64]| objective(x);
        let out = nelder_mead(
            &mut f,
            &theta0,
            &SimplexOpts {
                max_iters: 6000,
                x_tol: 1e-10,
                f_tol: 1e-14,
                scale: 0.3,
            },
        );
        best = best.min(out.value);
    }

    Ok(SupInfReport {
        direct_inner_inf: best,
        closed_form_inner_inf: closed_form,
        gap: best - closed_form,
    })
}

/// The nonconvex upper bound: the scalar objective with `xi` replaced by
/// its symmetrized diagonal majorant `cap_xi` (same `xi_dagger`, convex on
/// the orthant); valid without convexity of `xi`.
pub fn upper_bound_nonconvex(
    model: &ModelInstance,
    levels: usize,
    quad: QuadratureConfig,
    conj: ConjugateConfig,
    opts: &OptimizeOpts,
) -> Result<OptimizeResult> {
    if !model.covariance.diagonal_only() {
        return Err(Error::NotDiagonal);
    }
    let cap_spec = model.covariance.cap_xi_spec()?;
    let surrogate = ModelInstance::new(cap_spec, model.measure.clone(), model.t)?;
    let spec = ObjectiveSpec::new(surrogate, Reduction::Scalar, levels, quad, conj)?;
    maximize(&spec, opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub best_value: f64,
    /// Max - min restart value.
    pub value_spread: f64,
    /// Max pairwise Wasserstein-1 distance among restarts within
    /// `value_tol` of the best.
    pub w1_spread: f64,
    /// Number of restarts inside the value window.
    pub top_count: usize,
}

/// Runs the scalar optimizer with many restarts and reports how far apart
/// the near-optimal induced measures are.
pub fn uniqueness_probe(spec: &ObjectiveSpec, opts: &OptimizeOpts) -> Result<UniquenessReport> {
    if spec.reduction != Reduction::Scalar {
        return Err(Error::InvalidConfig(
            "uniqueness probe runs on the scalar reduction".into(),
        ));
    }
    let mut opts = opts.clone();
    opts.restarts = opts.restarts.max(20);
    let result = maximize(spec, &opts)?;
    let best = result
        .restarts
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let window = opts.value_tol.max(1e-7);
    let top: Vec<&AnyPath> = result
        .restarts
        .iter()
        .filter(|r| r.value >= best - window)
        .filter_map(|r| r.path.as_ref())
        .collect();
    let mut w1 = 0.0f64;
    for i in 0..top.len() {
        for j in i + 1..top.len() {
            w1 = w1.max(top[i].l1_distance(top[j]));
        }
    }
    Ok(UniquenessReport {
        best_value: result.value,
        value_spread: result.value_spread,
        w1_spread: w1,
        top_count: top.len(),
    })
}

/// `Law(p(U))` of a scalar path as a [`DiscreteMeasure`].
pub fn induced_scalar_measure(p: &ScalarPath) -> DiscreteMeasure {
    DiscreteMeasure::from_path(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn scalar_spec(model: ModelInstance, t: f64, k: usize) -> ObjectiveSpec {
        let model = model.with_t(t).unwrap();
        ObjectiveSpec::with_auto_quad(model, Reduction::Scalar, k, 0, ConjugateConfig::default())
            .unwrap()
    }

    #[test]
    fn zero_path_gives_zero_objective() {
        let spec = scalar_spec(presets::sk(), 0.3, 1);
        let v = spec.objective_scalar(&ScalarPath::zero()).unwrap();
        assert!(v.abs() < 1e-10, "objective at zero: {v}");
    }

    #[test]
    fn truncation_radius_sk() {
        // xi* = y^2/4: slope reaches 1 at y = 4, radius 4t.
        let spec = presets::sk().covariance;
        let conj = ConjugateConfig::default();
        let r = truncation_radius(&spec, 0.5, &conj).unwrap();
        assert!((r - 2.0).abs() < 1e-4, "radius {r}");
        assert_eq!(truncation_radius(&spec, 0.0, &conj).unwrap(), 0.0);
        let r1 = truncation_radius(&spec, 1.0, &conj).unwrap();
        assert!((r1 - 2.0 * r).abs() < 1e-4, "linear in t");
    }

    #[test]
    fn matrix_objective_matches_pair_on_invariant_path() {
        let t = 0.4;
        let model = presets::bp_sk(1.5).with_t(t).unwrap();
        let pair_spec = ObjectiveSpec::with_auto_quad(
            model.clone(),
            Reduction::Pair,
            2,
            0,
            ConjugateConfig::default(),
        )
        .unwrap();
        let mat_spec = ObjectiveSpec::with_auto_quad(
            model,
            Reduction::Matrix,
            2,
            0,
            ConjugateConfig::default(),
        )
        .unwrap();
        let q = PairPath::new(vec![0.0, 0.5, 1.0], vec![[0.05, 0.1], [0.12, 0.2]]).unwrap();
        let via_pair = pair_spec.objective_pair(&q).unwrap();
        let via_matrix = mat_spec.objective_matrix(&q.perp_lift(2)).unwrap();
        assert!(
            (via_pair - via_matrix).abs() < 1e-6,
            "pair {via_pair} vs matrix {via_matrix}"
        );
    }

    #[test]
    fn scalar_embeds_into_pair_objective() {
        let t = 0.5;
        let model = presets::bp_sk(1.5).with_t(t).unwrap();
        let scalar = scalar_spec(presets::bp_sk(1.5), t, 2);
        let pair_spec = ObjectiveSpec::with_auto_quad(
            model,
            Reduction::Pair,
            2,
            0,
            ConjugateConfig::default(),
        )
        .unwrap();
        let p = ScalarPath::new(vec![0.0, 0.6, 1.0], vec![0.08, 0.2]).unwrap();
        let via_scalar = scalar.objective_scalar(&p).unwrap();
        let via_pair = pair_spec.objective_pair(&PairPath::from_scalar(&p)).unwrap();
        assert!(
            (via_scalar - via_pair).abs() < 1e-6,
            "scalar {via_scalar} vs pair {via_pair}"
        );
    }

    #[test]
    fn theta_substitution_identity() {
        // Objective at t * grad xi(path values) equals
        // psi(t grad xi . p) - t sum dz theta(p_l): Fenchel-Young.
        let t = 0.4;
        let model = presets::bp_sk(1.5).with_t(t).unwrap();
        let spec = ObjectiveSpec::with_auto_quad(
            model.clone(),
            Reduction::Matrix,
            2,
            0,
            ConjugateConfig::default(),
        )
        .unwrap();
        let base = PairPath::new(vec![0.0, 0.5, 1.0], vec![[0.1, 0.15], [0.2, 0.35]]).unwrap();
        let lifted = base.perp_lift(2);
        let grad_values: Vec<DMatrix<f64>> = lifted
            .values()
            .iter()
            .map(|a| model.covariance.grad_xi(a).unwrap() * t)
            .collect();
        let grad_path = MatrixPath::new(lifted.grid().to_vec(), grad_values).unwrap();
        let lhs = spec.objective_matrix(&grad_path).unwrap();
        let psi_val = psi(&grad_path, &model.measure, &spec.quad).unwrap().value;
        let mut theta_term = 0.0;
        for (w, a) in lifted.grid().windows(2).zip(lifted.values().iter()) {
            theta_term += (w[1] - w[0]) * model.covariance.theta(a).unwrap();
        }
        let rhs = psi_val - t * theta_term;
        assert!((lhs - rhs).abs() < 1e-6, "lhs {lhs} vs rhs {rhs}");
    }

    #[test]
    fn optimize_at_t_zero_returns_zero() {
        let spec = scalar_spec(presets::sk(), 0.0, 2);
        let res = maximize(&spec, &OptimizeOpts::default()).unwrap();
        assert_eq!(res.value, 0.0);
        assert_eq!(res.induced_measure.points, vec![vec![0.0]]);
    }

    #[test]
    fn supinf_crosscheck_on_potts() {
        let model = presets::potts(2).with_t(0.3).unwrap();
        let conj = ConjugateConfig::default();
        // Zero path: both sides vanish.
        let zero = supinf_crosscheck(&model, &PairPath::zero(), 1, &conj).unwrap();
        assert!(zero.closed_form_inner_inf.abs() < 1e-12);
        assert!(zero.direct_inner_inf.abs() < 1e-9);
        // Random monotone path on its own grid.
        let p = PairPath::new(vec![0.0, 0.4, 1.0], vec![[0.2, 0.3], [0.5, 0.8]]).unwrap();
        let rep = supinf_crosscheck(&model, &p, 2, &conj).unwrap();
        assert!(
            rep.gap.abs() < 1e-4,
            "direct {} vs closed {}",
            rep.direct_inner_inf,
            rep.closed_form_inner_inf
        );
    }
}
