//! Monotone convex conjugates over truncated cones.
//!
//! `g*(y) = sup_{x in cone} { <x, y> - g(x) }` is computed on a bounded
//! truncation of the cone. For polynomial interactions of degree >= 2 the
//! conjugate is superlinear, so the supremum is attained on a bounded set;
//! the truncation radius starts at a degree-scaled default and doubles a few
//! times before the argmax pinning at the boundary is reported as
//! [`Error::TruncationHit`].

use crate::model::CovarianceSpec;
use crate::paths::PermMatrix;
use crate::rng::{derive_rng, tags};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct ConjugateConfig {
    /// Explicit truncation radius; `None` picks the degree-scaled default.
    pub search_radius: Option<f64>,
    /// Coarse scan resolution per axis.
    pub grid_points: usize,
    /// Refinement iterations (golden section / projected gradient).
    pub refine_iters: usize,
    /// Location tolerance for the refinement stage.
    pub tol: f64,
    /// How many times the radius may double after hitting the boundary.
    pub max_doublings: u32,
}

impl Default for ConjugateConfig {
    fn default() -> Self {
        ConjugateConfig {
            search_radius: None,
            grid_points: 129,
            refine_iters: 200,
            tol: 1e-11,
            max_doublings: 4,
        }
    }
}

impl ConjugateConfig {
    fn base_radius(&self, min_degree: usize, y_scale: f64) -> f64 {
        if let Some(r) = self.search_radius {
            return r;
        }
        let y = y_scale.abs().max(1.0);
        if min_degree >= 2 {
            16.0 * y.powf(1.0 / (min_degree as f64 - 1.0))
        } else {
            16.0 * y
        }
    }
}

/// A conjugate value together with where the supremum was attained.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConjugateValue {
    pub value: f64,
    pub argmax: [f64; 2],
    pub radius_used: f64,
}

const BOUNDARY_FRACTION: f64 = 1.0 - 1e-6;

/// `sup_{x in [0, radius]} { x y - f(x) }` by coarse scan plus golden
/// section, doubling the radius while the argmax pins at the boundary.
pub fn conjugate_scalar(
    f: &dyn Fn(f64) -> f64,
    y: f64,
    min_degree: usize,
    cfg: &ConjugateConfig,
) -> Result<ConjugateValue> {
    let mut radius = cfg.base_radius(min_degree, y);
    for attempt in 0..=cfg.max_doublings {
        let g = |x: f64| x * y - f(x);
        let n = cfg.grid_points.max(8);
        let mut best_k = 0usize;
        let mut best = f64::NEG_INFINITY;
        for k in 0..=n {
            let x = radius * k as f64 / n as f64;
            let v = g(x);
            if v > best {
                best = v;
                best_k = k;
            }
        }
        let lo = radius * best_k.saturating_sub(1) as f64 / n as f64;
        let hi = radius * (best_k + 1).min(n) as f64 / n as f64;
        let (x_star, v_star) = golden_max(&g, lo, hi, cfg.refine_iters, cfg.tol);
        if x_star < BOUNDARY_FRACTION * radius {
            return Ok(ConjugateValue {
                value: v_star,
                argmax: [x_star, 0.0],
                radius_used: radius,
            });
        }
        if attempt == cfg.max_doublings {
            return Err(Error::TruncationHit { radius });
        }
        radius *= 2.0;
    }
    unreachable!()
}

fn golden_max(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    for _ in 0..iters {
        if hi - lo < tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = g(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = g(mid);
    if fm >= f1 && fm >= f2 {
        (mid, fm)
    } else if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `(xi_dagger(./D))*(lambda) = sup_{mu >= 0} { lambda mu - xi_dagger(mu/D) }`
/// — the scalar conjugate entering the diagonal-model objective. Along the
/// diagonal this equals the PSD-cone conjugate at `lambda id_D`.
pub fn xi_dagger_scaled_star(
    spec: &CovarianceSpec,
    lambda: f64,
    cfg: &ConjugateConfig,
) -> Result<ConjugateValue> {
    if !spec.diagonal_only() {
        return Err(Error::NotDiagonal);
    }
    let d = spec.dimension() as f64;
    let f = move |mu: f64| spec.xi_dagger(mu / d);
    conjugate_scalar(&f, lambda, spec.min_degree(), cfg)
}

/// `xi_perp*(l1, l2) = sup_{mu in R_+^2} { l . mu - xi_perp(mu) }` with the
/// standard inner product; by the permutation-invariant reduction this
/// equals the dense conjugate `xi*(m(l1, l2))`.
pub fn xi_perp_star(
    spec: &CovarianceSpec,
    lambda1: f64,
    lambda2: f64,
    cfg: &ConjugateConfig,
) -> Result<ConjugateValue> {
    if spec.dimension() < 2 {
        return Err(Error::ScalarModelRejected);
    }
    let y_scale = lambda1.abs().max(lambda2.abs());
    let mut radius = cfg.base_radius(spec.min_degree(), y_scale);
    for attempt in 0..=cfg.max_doublings {
        let objective = |mu: &[f64; 2]| -> f64 {
            lambda1 * mu[0] + lambda2 * mu[1] - spec.xi_perp(mu[0], mu[1]).expect("D checked")
        };
        let gradient = |mu: &[f64; 2]| -> [f64; 2] {
            let g = spec.grad_xi_perp(mu[0], mu[1]).expect("D checked");
            [lambda1 - g[0], lambda2 - g[1]]
        };
        // Coarse scan seeds the ascent.
        let n = (cfg.grid_points.max(8) as f64).sqrt().ceil() as usize * 2;
        let mut best = [0.0f64; 2];
        let mut best_v = objective(&best);
        for i in 0..=n {
            for j in 0..=n {
                let mu = [radius * i as f64 / n as f64, radius * j as f64 / n as f64];
                let v = objective(&mu);
                if v > best_v {
                    best_v = v;
                    best = mu;
                }
            }
        }
        let (mu, value) =
            projected_ascent_box(&objective, &gradient, best, radius, cfg.refine_iters);
        if mu[0] < BOUNDARY_FRACTION * radius && mu[1] < BOUNDARY_FRACTION * radius {
            return Ok(ConjugateValue {
                value,
                argmax: mu,
                radius_used: radius,
            });
        }
        if attempt == cfg.max_doublings {
            return Err(Error::TruncationHit { radius });
        }
        radius *= 2.0;
    }
    unreachable!()
}

/// Projected gradient ascent on `[0, radius]^2` with an Armijo
/// sufficient-decrease rule (plain improvement acceptance lets overshooting
/// steps zigzag across the maximizer without ever shrinking).
fn projected_ascent_box(
    objective: &dyn Fn(&[f64; 2]) -> f64,
    gradient: &dyn Fn(&[f64; 2]) -> [f64; 2],
    start: [f64; 2],
    radius: f64,
    iters: usize,
) -> ([f64; 2], f64) {
    let clamp = |v: f64| v.clamp(0.0, radius);
    let mut x = [clamp(start[0]), clamp(start[1])];
    let mut fx = objective(&x);
    let mut step = 0.25 * radius.max(1.0);
    for _ in 0..iters {
        let g = gradient(&x);
        let mut improved = false;
        let mut s = step;
        for _ in 0..60 {
            let cand = [clamp(x[0] + s * g[0]), clamp(x[1] + s * g[1])];
            let moved_sq =
                (cand[0] - x[0]) * (cand[0] - x[0]) + (cand[1] - x[1]) * (cand[1] - x[1]);
            let fc = objective(&cand);
            if fc >= fx + 0.25 * moved_sq / s {
                x = cand;
                fx = fc;
                step = (s * 2.0).min(radius);
                improved = true;
                if moved_sq < 1e-26 {
                    return (x, fx);
                }
                break;
            }
            s *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

/// Point argument for the PSD-cone conjugate.
#[derive(Debug, Clone)]
pub enum PsdPoint {
    /// Permutation-invariant matrix in eigenvalue coordinates.
    Perm(PermMatrix),
    /// Dense symmetric 2 x 2 matrix (dense conjugation is implemented at
    /// D = 2 only; it exists to validate the reduction).
    Dense(DMatrix<f64>),
}

/// `xi*(m) = sup_{n PSD} { m . n - xi(n) }`.
///
/// Permutation-invariant arguments reduce to the two-variable conjugate of
/// `xi_perp`; dense arguments run a spectral-box projected ascent over
/// `{ n : 0 <= n <= radius id }`.
pub fn xi_star_psd(spec: &CovarianceSpec, point: &PsdPoint, cfg: &ConjugateConfig) -> Result<ConjugateValue> {
    match point {
        PsdPoint::Perm(m) => {
            if !m.is_psd(1e-9) {
                return Err(Error::NonPsdInput {
                    min_eig: m.lambda1().min(m.lambda2()),
                });
            }
            xi_perp_star(spec, m.lambda1(), m.lambda2(), cfg)
        }
        PsdPoint::Dense(m) => xi_star_dense2(spec, m, cfg),
    }
}

fn xi_star_dense2(spec: &CovarianceSpec, m: &DMatrix<f64>, cfg: &ConjugateConfig) -> Result<ConjugateValue> {
    if spec.dimension() != 2 || m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: spec.dimension().max(m.nrows()),
        });
    }
    let min_eig = crate::paths::min_eigenvalue(m);
    if min_eig < -1e-9 {
        return Err(Error::NonPsdInput { min_eig });
    }
    let y_scale = m.amax();
    let mut radius = cfg.base_radius(spec.min_degree(), y_scale);
    for attempt in 0..=cfg.max_doublings {
        let objective = |n: &DMatrix<f64>| -> f64 {
            crate::paths::frob_dot(m, n) - spec.eval_xi(n).expect("dims checked")
        };
        let gradient = |n: &DMatrix<f64>| -> DMatrix<f64> {
            let g = spec.grad_xi(n).expect("dims checked");
            // Symmetrize: the ascent stays inside symmetric matrices.
            let raw = m - g;
            (&raw + raw.transpose()) * 0.5
        };
        // Seeds: 0, clip(m/2), a scaled identity, and a few random PSD
        // points. For convex specs the objective is concave and any seed
        // reaches the global maximum.
        let mut seeds = vec![
            DMatrix::zeros(2, 2),
            clip_spectral(&(m * 0.5), radius),
            DMatrix::from_diagonal_element(2, 2, 0.25 * radius),
        ];
        let mut rng = derive_rng(0xC0FFEE, &[tags::CONJUGATE, attempt as u64]);
        for _ in 0..3 {
            let g = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0f64));
            seeds.push(clip_spectral(&(&g * g.transpose() * (0.25 * radius)), radius));
        }
        let mut best: Option<(DMatrix<f64>, f64)> = None;
        for seed in seeds {
            let (n, v) = projected_ascent_spectral(&objective, &gradient, seed, radius, cfg.refine_iters);
            if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
                best = Some((n, v));
            }
        }
        let (n, value) = best.unwrap();
        let top_eig = n.clone().symmetric_eigen().eigenvalues.amax();
        if top_eig < BOUNDARY_FRACTION * radius {
            return Ok(ConjugateValue {
                value,
                argmax: [n[(0, 0)], n[(1, 1)]],
                radius_used: radius,
            });
        }
        if attempt == cfg.max_doublings {
            return Err(Error::TruncationHit { radius });
        }
        radius *= 2.0;
    }
    unreachable!()
}

/// Projects a symmetric matrix onto `{0 <= n <= radius id}` by eigenvalue
/// clipping.
fn clip_spectral(n: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    let sym = (n + n.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut out = DMatrix::zeros(n.nrows(), n.ncols());
    for k in 0..eig.eigenvalues.len() {
        let lam = eig.eigenvalues[k].clamp(0.0, radius);
        let v = eig.eigenvectors.column(k);
        out += lam * &v * v.transpose();
    }
    out
}

fn projected_ascent_spectral(
    objective: &dyn Fn(&DMatrix<f64>) -> f64,
    gradient: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>,
    start: DMatrix<f64>,
    radius: f64,
    iters: usize,
) -> (DMatrix<f64>, f64) {
    let mut x = clip_spectral(&start, radius);
    let mut fx = objective(&x);
    let mut step = 0.25 * radius.max(1.0);
    for _ in 0..iters {
        let g = gradient(&x);
        let mut improved = false;
        let mut s = step;
        for _ in 0..60 {
            let cand = clip_spectral(&(&x + &g * s), radius);
            let moved_sq = (&cand - &x).norm_squared();
            let fc = objective(&cand);
            if fc >= fx + 0.25 * moved_sq / s {
                x = cand;
                fx = fc;
                step = (s * 2.0).min(radius);
                improved = true;
                if moved_sq < 1e-26 {
                    return (x, fx);
                }
                break;
            }
            s *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

/// Agreement report for the reduction identity
/// `xi_perp*(l1, l2) = xi*(m(l1, l2))` at sampled points.
#[derive(Debug, Clone, Serialize)]
pub struct PerpConjugateReport {
    pub samples: usize,
    pub max_rel_deviation: f64,
    pub worst_point: [f64; 2],
}

/// Samples `lambda in [0, radius/2]^2` and compares the reduced and dense
/// conjugates (D = 2 models).
pub fn check_perp_conjugate_identity(
    spec: &CovarianceSpec,
    samples: usize,
    rng_seed: u64,
    cfg: &ConjugateConfig,
) -> Result<PerpConjugateReport> {
    if spec.dimension() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: spec.dimension(),
        });
    }
    let mut rng = derive_rng(rng_seed, &[tags::CONJUGATE, 1]);
    let scan = cfg.base_radius(spec.min_degree(), 1.0) / 2.0;
    let half = scan.min(4.0);
    let mut max_rel: f64 = 0.0;
    let mut worst = [0.0f64; 2];
    for _ in 0..samples {
        let l1 = rng.gen_range(0.0..half);
        let l2 = rng.gen_range(0.0..half);
        let reduced = xi_perp_star(spec, l1, l2, cfg)?.value;
        let dense = xi_star_dense2(spec, &PermMatrix::new(2, l1, l2).to_dense(), cfg)?.value;
        let rel = (reduced - dense).abs() / reduced.abs().max(dense.abs()).max(1.0);
        if rel > max_rel {
            max_rel = rel;
            worst = [l1, l2];
        }
    }
    Ok(PerpConjugateReport {
        samples,
        max_rel_deviation: max_rel,
        worst_point: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn scalar_quadratic_conjugate() {
        // f(x) = x^2: conjugate y^2/4 at x = y/2.
        let cfg = ConjugateConfig::default();
        let v = conjugate_scalar(&|x| x * x, 1.0, 2, &cfg).unwrap();
        assert!((v.value - 0.25).abs() < 1e-9);
        assert!((v.argmax[0] - 0.5).abs() < 1e-5);
        // y = 0 with f >= 0, f(0) = 0: conjugate 0.
        let v = conjugate_scalar(&|x| x * x, 0.0, 2, &cfg).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn linear_growth_hits_truncation() {
        let cfg = ConjugateConfig::default();
        let err = conjugate_scalar(&|x| x, 2.0, 1, &cfg).unwrap_err();
        assert!(matches!(err, Error::TruncationHit { .. }));
    }

    #[test]
    fn sk_scaled_dagger_conjugate() {
        // D = 1, xi(x) = x^2: (xi_dagger(./1))*(y) = y^2/4.
        let spec = presets::sk().covariance;
        let cfg = ConjugateConfig::default();
        for y in [0.0, 0.5, 1.0, 3.0] {
            let v = xi_dagger_scaled_star(&spec, y, &cfg).unwrap();
            assert!((v.value - y * y / 4.0).abs() < 1e-8, "y={y}");
        }
    }

    #[test]
    fn potts_dense_conjugate_at_identity() {
        // xi(R) = sum R^2: sup { tr(n) - |n|^2 } = 1/2 at n = id/2.
        let model = presets::potts(2);
        let cfg = ConjugateConfig::default();
        let id = DMatrix::identity(2, 2);
        let v = xi_star_psd(&model.covariance, &PsdPoint::Dense(id), &cfg).unwrap();
        assert!((v.value - 0.5).abs() < 1e-7, "value {}", v.value);
        // And at zero the conjugate vanishes.
        let zero = DMatrix::zeros(2, 2);
        let v = xi_star_psd(&model.covariance, &PsdPoint::Dense(zero), &cfg).unwrap();
        assert!(v.value.abs() < 1e-10);
    }

    #[test]
    fn potts_reduced_matches_closed_form() {
        // xi_perp(m1, m2) = m1^2 + m2^2 at D = 2, so the conjugate is
        // (l1^2 + l2^2)/4 for nonnegative arguments.
        let model = presets::potts(2);
        let cfg = ConjugateConfig::default();
        for (l1, l2) in [(0.0, 0.0), (1.0, 1.0), (0.3, 1.7), (2.0, 0.1)] {
            let v = xi_perp_star(&model.covariance, l1, l2, &cfg).unwrap();
            let expected = (l1 * l1 + l2 * l2) / 4.0;
            assert!((v.value - expected).abs() < 1e-8, "({l1},{l2})");
        }
    }

    #[test]
    fn perp_identity_on_potts() {
        let model = presets::potts(2);
        let cfg = ConjugateConfig::default();
        let report =
            check_perp_conjugate_identity(&model.covariance, 10, 7, &cfg).unwrap();
        assert!(report.max_rel_deviation < 1e-6, "{report:?}");
    }

    #[test]
    fn rejects_non_psd_point() {
        let model = presets::potts(2);
        let cfg = ConjugateConfig::default();
        let m = PermMatrix::new(2, -1.0, 1.0);
        assert!(matches!(
            xi_star_psd(&model.covariance, &PsdPoint::Perm(m), &cfg),
            Err(Error::NonPsdInput { .. })
        ));
    }

    #[test]
    fn fenchel_young_on_bp_sk() {
        // xi*(grad xi(a)) = theta(a) on cone points, via both routes.
        let model = presets::bp_sk(1.5);
        let spec = &model.covariance;
        let cfg = ConjugateConfig::default();
        for (l1, l2) in [(0.2, 0.6), (0.8, 0.8), (0.1, 1.2)] {
            let a = PermMatrix::new(2, l1, l2).to_dense();
            let grad = spec.grad_xi(&a).unwrap();
            let theta = spec.theta(&a).unwrap();
            let dense = xi_star_psd(spec, &PsdPoint::Dense(grad.clone()), &cfg)
                .unwrap()
                .value;
            assert!((dense - theta).abs() < 1e-6, "dense route at ({l1},{l2})");
            let perm = PermMatrix::from_dense(&grad, 1e-9).unwrap();
            let reduced = xi_star_psd(spec, &PsdPoint::Perm(perm), &cfg).unwrap().value;
            assert!((reduced - theta).abs() < 1e-6, "reduced route at ({l1},{l2})");
        }
    }
}
