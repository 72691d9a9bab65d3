//! Brute-force small-N disorder averages of the corrected free energy.
//!
//! For diagonal models the Gaussian process is sampled monomial by
//! monomial: a monomial `c prod_d x_d^{i_d}` of total degree `I` gets an
//! order-`I` tensor of iid standard normals and the process
//! `sqrt(c) N^{-(I-1)/2} sum_j g_j prod_k sigma[species_k][j_k]`, which
//! reproduces the covariance `N xi(R(sigma, tau))` exactly. Configurations
//! are enumerated exhaustively (no sampler bias at desk scale) and the
//! log-sum-exp is taken in a numerically stable form.

use crate::model::ModelInstance;
use crate::quadrature::pairwise_sum;
use crate::rng::{derive_rng, tags};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Keeps exhaustive enumeration affordable: `|support|^N <= 2^24`.
const CONFIG_BUDGET: f64 = 16_777_216.0;
/// Two-replica statistics enumerate pairs of configurations.
const PAIR_BUDGET: f64 = 8_192.0;

struct MonomialTensor {
    /// Species index of each of the `I` factors.
    species: Vec<usize>,
    /// `sqrt(coeff) * N^{-(I-1)/2}`.
    scale: f64,
    /// `N^I` iid standard normals in odometer order.
    coefficients: Vec<f64>,
}

/// One disorder sample of the Hamiltonian for a diagonal model.
pub struct HamiltonianSample {
    n: usize,
    monomials: Vec<MonomialTensor>,
}

impl HamiltonianSample {
    /// `H(sigma)` for a configuration given as D rows of N site values.
    pub fn eval(&self, rows: &[Vec<f64>]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for m in &self.monomials {
            let order = m.species.len();
            let mut idx = vec![0usize; order];
            let mut acc = 0.0;
            for g in &m.coefficients {
                let mut prod = *g;
                for (k, &site) in idx.iter().enumerate() {
                    prod *= rows[m.species[k]][site];
                }
                acc += prod;
                for k in (0..order).rev() {
                    idx[k] += 1;
                    if idx[k] < n {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            total += m.scale * acc;
        }
        total
    }
}

/// Draws the per-monomial Gaussian coefficient tensors.
pub fn sample_hamiltonian(model: &ModelInstance, n: usize, seed: u64) -> Result<HamiltonianSample> {
    let spec = &model.covariance;
    if spec.formal() {
        return Err(Error::FormalSpecRejected);
    }
    if !spec.diagonal_only() {
        return Err(Error::NotDiagonal);
    }
    let mut monomials = Vec::with_capacity(spec.monomials().len());
    for (k, mono) in spec.monomials().iter().enumerate() {
        let order = mono.degree();
        let tuples = (n as f64).powi(order as i32);
        if tuples > CONFIG_BUDGET {
            return Err(Error::BudgetExceeded {
                detail: format!("monomial tensor would hold N^{order} = {tuples} entries"),
            });
        }
        let mut rng = derive_rng(seed, &[tags::SIMULATE, k as u64]);
        let coefficients: Vec<f64> = (0..tuples as usize)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        monomials.push(MonomialTensor {
            species: mono.entries.iter().map(|&(d, _)| d).collect(),
            scale: mono.coeff.sqrt() * (n as f64).powf(-((order as f64 - 1.0) / 2.0)),
            coefficients,
        });
    }
    Ok(HamiltonianSample { n, monomials })
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeEnergyEstimate {
    pub n: usize,
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_disorder: usize,
}

fn check_enumeration_budget(model: &ModelInstance, n: usize, budget: f64) -> Result<usize> {
    let atoms = model.measure.atoms().len();
    let configs = (atoms as f64).powi(n as i32);
    if configs > budget {
        return Err(Error::BudgetExceeded {
            detail: format!("{atoms}^{n} = {configs} configurations exceed the budget"),
        });
    }
    Ok(configs as usize)
}

/// Iterates all `|atoms|^n` configurations as atom-index vectors.
fn for_each_config(n: usize, n_atoms: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; n];
    let total = n_atoms.pow(n as u32);
    for _ in 0..total {
        f(&idx);
        for k in (0..n).rev() {
            idx[k] += 1;
            if idx[k] < n_atoms {
                break;
            }
            idx[k] = 0;
        }
    }
}

struct ConfigTables {
    /// Per-atom log weight.
    log_w: Vec<f64>,
    /// Per-atom coordinate vector.
    coords: Vec<Vec<f64>>,
    dim: usize,
}

impl ConfigTables {
    fn new(model: &ModelInstance) -> ConfigTables {
        let atoms = model.measure.atoms();
        ConfigTables {
            log_w: atoms.iter().map(|(_, w)| w.ln()).collect(),
            coords: atoms.iter().map(|(x, _)| x.clone()).collect(),
            dim: model.dimension(),
        }
    }

    fn rows(&self, config: &[usize]) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|d| config.iter().map(|&a| self.coords[a][d]).collect())
            .collect()
    }

    fn log_weight(&self, config: &[usize]) -> f64 {
        config.iter().map(|&a| self.log_w[a]).sum()
    }

    /// Diagonal overlap vector `R(sigma, tau)`.
    fn overlap(&self, rows_a: &[Vec<f64>], rows_b: &[Vec<f64>], n: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|d| {
                rows_a[d]
                    .iter()
                    .zip(&rows_b[d])
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }
}

/// One disorder sample of `-(1/N) log Z` with the self-overlap correction.
fn free_energy_sample(model: &ModelInstance, tables: &ConfigTables, n: usize, seed: u64) -> Result<f64> {
    let t = model.t;
    let ham = sample_hamiltonian(model, n, seed)?;
    let n_atoms = tables.log_w.len();
    let mut vals = Vec::with_capacity(n_atoms.pow(n as u32));
    let mut err = None;
    for_each_config(n, n_atoms, |config| {
        if err.is_some() {
            return;
        }
        let rows = tables.rows(config);
        let overlap = tables.overlap(&rows, &rows, n);
        let xi_self = match model.covariance.eval_xi_diag(&overlap) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let h = ham.eval(&rows);
        vals.push((2.0 * t).sqrt() * h - n as f64 * t * xi_self + tables.log_weight(config));
    });
    if let Some(e) = err {
        return Err(e);
    }
    let m = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = vals.iter().map(|v| (v - m).exp()).collect();
    let lse = m + pairwise_sum(&exps).ln();
    Ok(-lse / n as f64)
}

/// Disorder-averaged corrected free energy by exhaustive enumeration.
///
/// At `t = 0` the integrand has no disorder dependence and the value is 0
/// identically; that case returns exactly zero.
pub fn free_energy_mc(model: &ModelInstance, n: usize, n_disorder: usize, seed: u64) -> Result<FreeEnergyEstimate> {
    check_enumeration_budget(model, n, CONFIG_BUDGET)?;
    if n_disorder == 0 {
        return Err(Error::InvalidConfig("need at least one disorder sample".into()));
    }
    if model.t == 0.0 {
        return Ok(FreeEnergyEstimate {
            n,
            t: 0.0,
            mean: 0.0,
            stderr: 0.0,
            n_disorder,
        });
    }
    let tables = ConfigTables::new(model);
    let samples: Vec<Result<f64>> = (0..n_disorder)
        .into_par_iter()
        .map(|s| free_energy_sample(model, &tables, n, derive_seed_for_sample(seed, s)))
        .collect();
    let mut values = Vec::with_capacity(n_disorder);
    for s in samples {
        values.push(s?);
    }
    let mean = pairwise_sum(&values) / n_disorder as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (n_disorder as f64 - 1.0).max(1.0);
    Ok(FreeEnergyEstimate {
        n,
        t: model.t,
        mean,
        stderr: (var / n_disorder as f64).sqrt(),
        n_disorder,
    })
}

fn derive_seed_for_sample(master: u64, sample: usize) -> u64 {
    // Spread disorder samples across independent tensor streams.
    master
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(sample as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapReport {
    pub n: usize,
    pub t: f64,
    pub n_disorder: usize,
    /// Mean (over disorder) of the worst total-variation distance between
    /// the two-replica overlap law and a species-permuted copy.
    pub perm_defect_mean: f64,
    pub perm_defect_stderr: f64,
    /// Mean Gibbs mass of events with a strictly negative overlap
    /// component.
    pub negative_mass_mean: f64,
    pub negative_mass_stderr: f64,
}

/// Exact two-replica overlap statistics under the disorder-averaged Gibbs
/// measure.
pub fn overlap_statistics(model: &ModelInstance, n: usize, seed: u64, n_disorder: usize) -> Result<OverlapReport> {
    let configs = check_enumeration_budget(model, n, PAIR_BUDGET)?;
    let tables = ConfigTables::new(model);
    let d = model.dimension();
    let perms = crate::model::permutations(d);

    let per_sample: Vec<Result<(f64, f64)>> = (0..n_disorder)
        .into_par_iter()
        .map(|s| -> Result<(f64, f64)> {
            let ham = sample_hamiltonian(model, n, derive_seed_for_sample(seed, s))?;
            let t = model.t;
            let n_atoms = tables.log_w.len();
            let mut vals = Vec::with_capacity(configs);
            let mut rows_all = Vec::with_capacity(configs);
            for_each_config(n, n_atoms, |config| {
                let rows = tables.rows(config);
                let overlap = tables.overlap(&rows, &rows, n);
                let xi_self = model.covariance.eval_xi_diag(&overlap).expect("diagonal");
                let h = ham.eval(&rows);
                vals.push((2.0 * t).sqrt() * h - n as f64 * t * xi_self + tables.log_weight(config));
                rows_all.push(rows);
            });
            let m = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let exps: Vec<f64> = vals.iter().map(|v| (v - m).exp()).collect();
            let z = pairwise_sum(&exps);
            let gibbs: Vec<f64> = exps.iter().map(|e| e / z).collect();

            // Quantized overlap keys; 2^20 resolves every rational overlap
            // arising from +-1/sqrt(D) atoms at desk N.
            let quant = |x: f64| (x * (1u64 << 20) as f64).round() as i64;
            let mut law: HashMap<Vec<i64>, f64> = HashMap::new();
            let mut negative = 0.0;
            for (i, wi) in gibbs.iter().enumerate() {
                for (j, wj) in gibbs.iter().enumerate() {
                    let w = wi * wj;
                    let overlap = tables.overlap(&rows_all[i], &rows_all[j], n);
                    let key: Vec<i64> = overlap.iter().map(|&x| quant(x)).collect();
                    if key.iter().any(|&k| k < 0) {
                        negative += w;
                    }
                    *law.entry(key).or_insert(0.0) += w;
                }
            }
            let mut defect = 0.0f64;
            for perm in &perms {
                if perm.iter().enumerate().all(|(i, &p)| i == p) {
                    continue;
                }
                let mut tv = 0.0;
                for (key, w) in &law {
                    let permuted: Vec<i64> = (0..d).map(|i| key[perm[i]]).collect();
                    let w2 = law.get(&permuted).copied().unwrap_or(0.0);
                    tv += (w - w2).abs();
                }
                defect = defect.max(0.5 * tv);
            }
            Ok((defect, negative))
        })
        .collect();

    let mut defects = Vec::with_capacity(n_disorder);
    let mut negatives = Vec::with_capacity(n_disorder);
    for r in per_sample {
        let (d_, n_) = r?;
        defects.push(d_);
        negatives.push(n_);
    }
    let stat = |xs: &[f64]| -> (f64, f64) {
        let mean = pairwise_sum(xs) / xs.len() as f64;
        let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (xs.len() as f64 - 1.0).max(1.0);
        (mean, (var / xs.len() as f64).sqrt())
    };
    let (pd_mean, pd_err) = stat(&defects);
    let (ng_mean, ng_err) = stat(&negatives);
    Ok(OverlapReport {
        n,
        t: model.t,
        n_disorder,
        perm_defect_mean: pd_mean,
        perm_defect_stderr: pd_err,
        negative_mass_mean: ng_mean,
        negative_mass_stderr: ng_err,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub estimate: FreeEnergyEstimate,
    /// Variational value (upper bound for nonconvex interactions).
    pub bound: f64,
    pub bound_quad_error: f64,
    /// `bound - estimate.mean`.
    pub gap: f64,
    /// `max(0.1, 5 stderr)` finite-size allowance.
    pub slack: f64,
    pub within_slack: bool,
}

pub struct CompareOpts {
    pub n_disorder: usize,
    pub levels: usize,
    pub optimize: crate::parisi::OptimizeOpts,
}

impl Default for CompareOpts {
    fn default() -> Self {
        CompareOpts {
            n_disorder: 200,
            levels: 2,
            optimize: crate::parisi::OptimizeOpts::default(),
        }
    }
}

/// Compares the exhaustive small-N estimate against the variational value
/// of the diagonal majorant (which coincides with the limit for convex
/// diagonal models).
pub fn compare_bound(model: &ModelInstance, n: usize, seed: u64, opts: &CompareOpts) -> Result<CompareReport> {
    let estimate = free_energy_mc(model, n, opts.n_disorder, seed)?;
    let bound = if model.t == 0.0 {
        crate::parisi::OptimizeResult {
            best_path: crate::parisi::AnyPath::Scalar(crate::paths::ScalarPath::zero()),
            value: 0.0,
            quad_error: 0.0,
            restarts: Vec::new(),
            induced_measure: crate::parisi::AnyPath::Scalar(crate::paths::ScalarPath::zero())
                .induced_measure(),
            spread: 0.0,
            value_spread: 0.0,
            trace: crate::parisi::OptimizeTrace {
                k_schedule: vec![1],
                value_cap: 0.0,
                search_nodes: 0,
                total_evals: 0,
            },
        }
    } else {
        let dims = opts.levels;
        crate::parisi::upper_bound_nonconvex(
            model,
            opts.levels,
            crate::cascade::QuadratureConfig::auto(dims, seed),
            crate::conjugate::ConjugateConfig::default(),
            &opts.optimize,
        )?
    };
    let slack = (5.0 * estimate.stderr).max(0.1);
    let gap = bound.value - estimate.mean;
    Ok(CompareReport {
        within_slack: estimate.mean <= bound.value + slack,
        gap,
        slack,
        bound: bound.value,
        bound_quad_error: bound.quad_error,
        estimate,
    })
}

/// Empirical covariance check: `Cov(H(sigma), H(tau)) ~ N xi(R)` within
/// statistical error over fresh disorder draws.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceCheck {
    pub draws: usize,
    pub pairs: usize,
    /// Worst `|empirical - N xi(R)| / (3 stderr)` over the tested pairs;
    /// below 1 means every pair is within three standard errors.
    pub worst_ratio: f64,
}

pub fn covariance_check(
    model: &ModelInstance,
    n: usize,
    draws: usize,
    pairs: usize,
    seed: u64,
) -> Result<CovarianceCheck> {
    let tables = ConfigTables::new(model);
    let n_atoms = tables.log_w.len();
    let mut rng = derive_rng(seed, &[tags::SIMULATE, 7777]);
    let mut worst: f64 = 0.0;
    for pair_idx in 0..pairs {
        let cfg_a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_atoms)).collect();
        let cfg_b: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_atoms)).collect();
        let rows_a = tables.rows(&cfg_a);
        let rows_b = tables.rows(&cfg_b);
        let overlap = tables.overlap(&rows_a, &rows_b, n);
        let target = n as f64 * model.covariance.eval_xi_diag(&overlap)?;

        let products: Vec<f64> = (0..draws)
            .into_par_iter()
            .map(|k| -> Result<f64> {
                let ham = sample_hamiltonian(
                    model,
                    n,
                    derive_seed_for_sample(seed ^ (pair_idx as u64) << 32, k),
                )?;
                Ok(ham.eval(&rows_a) * ham.eval(&rows_b))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let mean = pairwise_sum(&products) / draws as f64;
        let var = products
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (draws as f64 - 1.0);
        let stderr = (var / draws as f64).sqrt().max(1e-12);
        worst = worst.max((mean - target).abs() / (3.0 * stderr));
    }
    Ok(CovarianceCheck {
        draws,
        pairs,
        worst_ratio: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn free_energy_vanishes_at_t_zero() {
        let model = presets::sk();
        let est = free_energy_mc(&model, 6, 8, 1).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn jensen_bound_holds() {
        // F_N >= 0 analytically: annealing cancels the correction exactly.
        let model = presets::sk().with_t(0.3).unwrap();
        let est = free_energy_mc(&model, 6, 40, 2).unwrap();
        assert!(est.mean >= -3.0 * est.stderr, "mean {}", est.mean);
    }

    #[test]
    fn enumeration_is_seed_deterministic() {
        let model = presets::sk().with_t(0.2).unwrap();
        let a = free_energy_mc(&model, 5, 10, 9).unwrap();
        let b = free_energy_mc(&model, 5, 10, 9).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn budget_is_enforced() {
        let model = presets::bp_sk(1.5).with_t(0.1).unwrap();
        assert!(matches!(
            free_energy_mc(&model, 13, 2, 0),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn formal_specs_are_rejected() {
        let model = presets::formal_cubic().with_t(0.1).unwrap();
        assert!(matches!(
            sample_hamiltonian(&model, 4, 0),
            Err(Error::FormalSpecRejected)
        ));
    }

    #[test]
    fn covariance_identity_sk() {
        let model = presets::sk();
        let report = covariance_check(&model, 6, 4000, 4, 3).unwrap();
        assert!(report.worst_ratio < 1.0, "ratio {}", report.worst_ratio);
    }

    #[test]
    fn covariance_identity_cross_species() {
        // Mixed monomial x1 x2: covariance N * R1 R2.
        let model = presets::bp_sk(1.0);
        let report = covariance_check(&model, 4, 4000, 4, 5).unwrap();
        assert!(report.worst_ratio < 1.0, "ratio {}", report.worst_ratio);
    }

    #[test]
    fn overlap_statistics_at_t_zero() {
        // Product measure at t = 0: permutation defect vanishes.
        let model = presets::bp_sk(1.5);
        let rep = overlap_statistics(&model, 4, 11, 6).unwrap();
        assert!(rep.perm_defect_mean < 1e-12, "defect {}", rep.perm_defect_mean);
    }
}
