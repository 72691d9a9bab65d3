//! The property suite behind `parisi verify`.
//!
//! Every check that applies to the given model runs at fixed derived seeds
//! and reports its tolerance and margin (how far inside the tolerance the
//! worst case landed). Checks that do not apply to a model (e.g. dense
//! conjugate identities at D != 2, sampleability gates on non-formal
//! models) are skipped rather than failed. The sampled convexity probe is
//! informational: nonconvex interactions are legitimate inputs for the
//! upper-bound route, so nonconvexity is reported, not flagged.

use crate::cascade::{
    concavity_probe, psi, psi_for_model, psi_scalar, quantile_path, DiscreteMeasure,
    QuadratureConfig,
};
use crate::conjugate::{
    check_perp_conjugate_identity, xi_dagger_scaled_star, xi_star_psd, ConjugateConfig, PsdPoint,
};
use crate::model::{check_monomial_inequality, ModelInstance};
use crate::parisi::{ObjectiveSpec, Reduction};
use crate::paths::{
    jensen_decrease_check, lift_pair, lift_scalar, pava_nonneg, project_pair, project_scalar,
    MatrixPath, PairPath, PermMatrix, Repair, ScalarPath,
};
use crate::rng::{derive_rng, tags};
use crate::simulate;
use crate::Result;
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub tolerance: f64,
    /// Worst observed deviation; a pass means `margin <= tolerance`.
    pub margin: f64,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, tolerance: f64, margin: f64, detail: impl Into<String>) -> CheckReport {
        CheckReport {
            name: name.to_string(),
            passed: margin <= tolerance,
            tolerance,
            margin,
            detail: detail.into(),
        }
    }

    fn pass(name: &str, detail: impl Into<String>) -> CheckReport {
        CheckReport {
            name: name.to_string(),
            passed: true,
            tolerance: 0.0,
            margin: 0.0,
            detail: detail.into(),
        }
    }

    fn fail(name: &str, detail: impl Into<String>) -> CheckReport {
        CheckReport {
            name: name.to_string(),
            passed: false,
            tolerance: 0.0,
            margin: 1.0,
            detail: detail.into(),
        }
    }
}

/// Runs every applicable check; the CLI exits nonzero when any `passed` is
/// false.
pub fn run_verify(model: &ModelInstance, seed: u64) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    let spec = &model.covariance;
    let d = model.dimension();
    let invariant = spec.check_permutation_invariance();
    let measure_invariant = model.measure.is_permutation_invariant(1e-9);
    let convexity = spec.check_convexity_on_cone(400, seed ^ 1);
    let conj_cfg = ConjugateConfig::default();
    let t_probe = if model.t > 0.0 { model.t } else { 0.3 };

    // ---- model ----
    reports.push(CheckReport::new(
        "model/xi-at-zero",
        1e-15,
        spec.eval_xi(&DMatrix::zeros(d, d))?.abs(),
        "xi(0) = 0 (no constant term)",
    ));

    reports.push(CheckReport::new(
        "model/monomials-permutation-invariant",
        1e-12,
        invariant.max_deviation,
        "monomial list closed under simultaneous relabeling",
    ));

    if invariant.invariant {
        let mut rng = derive_rng(seed, &[tags::VERIFY, 1]);
        let perms = crate::model::permutations(d);
        let mut worst: f64 = 0.0;
        for _ in 0..40 {
            let r = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            let base = spec.eval_xi(&r)?;
            for perm in &perms {
                let rs = DMatrix::from_fn(d, d, |i, j| r[(perm[i], perm[j])]);
                worst = worst.max((spec.eval_xi(&rs)? - base).abs());
            }
        }
        reports.push(CheckReport::new(
            "model/eval-invariant-under-relabeling",
            1e-10,
            worst,
            "xi(R^s) = xi(R) on sampled matrices",
        ));
    }

    reports.push(CheckReport::pass(
        "model/convexity-probe",
        format!(
            "informational: midpoint convexity on the cone {} (worst violation {:.3e})",
            if convexity.midpoint_convex { "holds" } else { "FAILS" },
            convexity.worst_violation
        ),
    ));

    reports.push({
        let sym = spec.symmetrize();
        let twice = sym.symmetrize();
        let dev = if sym == twice { 0.0 } else { 1.0 };
        CheckReport::new("model/symmetrize-idempotent", 0.0, dev, "sym(sym(xi)) = sym(xi)")
    });

    {
        // Exhaustive small monomial inequality (always a theorem).
        let mut rng = derive_rng(seed, &[tags::VERIFY, 2]);
        let mut violations = 0usize;
        let mut cases = 0usize;
        for dd in 2..=3usize {
            let tuples = exponent_tuples(dd, 4);
            for tuple in tuples {
                for _ in 0..10 {
                    let x: Vec<f64> = (0..dd).map(|_| rng.gen_range(0.0..2.0)).collect();
                    cases += 1;
                    if !check_monomial_inequality(&tuple, &x, false)? {
                        violations += 1;
                    }
                }
            }
        }
        reports.push(CheckReport::new(
            "model/monomial-inequality",
            0.0,
            violations as f64,
            format!("{cases} nonnegative cases, exact evaluation"),
        ));
    }

    if spec.formal() {
        // Sampleability gates: everything presuming a Gaussian process must
        // reject formal specs.
        let p = ScalarPath::constant(0.2);
        let quad = QuadratureConfig::tensor(8);
        let psi_gate = psi_for_model(model, &MatrixPath::diag_embed(&p, d), &quad).is_err();
        let ham_gate = simulate::sample_hamiltonian(model, 3, seed).is_err();
        let obj_gate = ObjectiveSpec::new(
            model.with_t(t_probe)?,
            if spec.diagonal_only() { Reduction::Scalar } else { Reduction::Pair },
            1,
            quad,
            conj_cfg.clone(),
        )
        .is_err();
        reports.push(if psi_gate && ham_gate && obj_gate {
            CheckReport::pass(
                "model/formal-gates",
                "psi, simulate and objectives all reject the formal spec",
            )
        } else {
            CheckReport::fail(
                "model/formal-gates",
                format!("gates: psi={psi_gate} hamiltonian={ham_gate} objective={obj_gate}"),
            )
        });
    } else {
        if spec.diagonal_only() {
            // xi_dagger convex and nondecreasing on a grid.
            let mut worst_conv: f64 = 0.0;
            let mut worst_mono: f64 = 0.0;
            for k in 0..40 {
                let x = k as f64 * 0.05;
                let h = 0.05;
                let mid = spec.xi_dagger(x + h);
                let convexity_defect = 2.0 * mid - spec.xi_dagger(x) - spec.xi_dagger(x + 2.0 * h);
                worst_conv = worst_conv.max(convexity_defect);
                worst_mono = worst_mono.max(spec.xi_dagger(x) - mid);
            }
            reports.push(CheckReport::new(
                "model/dagger-convex-nondecreasing",
                1e-10,
                worst_conv.max(worst_mono),
                "xi_dagger midpoint-convex and nondecreasing on a grid",
            ));

            let upper = spec.check_xi_upper_inequality(300, seed ^ 2)?;
            reports.push(CheckReport::new(
                "model/xi-below-cap-xi",
                1e-12,
                (-upper.min_margin).max(0.0),
                format!(
                    "xi <= cap_xi on 300 sampled orthant points (min margin {:.3e})",
                    upper.min_margin
                ),
            ));
        }

        // theta >= 0 on the cone for nonnegative coefficients.
        let mut rng = derive_rng(seed, &[tags::VERIFY, 3]);
        let mut worst: f64 = 0.0;
        for _ in 0..60 {
            let a = if spec.diagonal_only() {
                DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| {
                    rng.gen_range(0.0..1.5)
                }))
            } else {
                crate::model::random_psd(d, &mut rng)
            };
            worst = worst.max(-spec.theta(&a)?);
        }
        reports.push(CheckReport::new(
            "model/theta-nonnegative-on-cone",
            1e-10,
            worst,
            "theta(a) >= 0 at sampled cone points",
        ));
    }

    // ---- paths ----
    if d >= 2 {
        let mut rng = derive_rng(seed, &[tags::VERIFY, 4]);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let a = rng.gen_range(-2.0..2.0);
            let t = rng.gen_range(-1.0..1.0);
            let m = PermMatrix::from_entries(a, t, d);
            let back = PermMatrix::from_dense(&m.to_dense(), 1e-9)?;
            worst = worst
                .max((back.lambda1() - m.lambda1()).abs())
                .max((back.lambda2() - m.lambda2()).abs());
        }
        reports.push(CheckReport::new(
            "paths/perm-matrix-roundtrip",
            1e-12,
            worst,
            "entries -> eigenvalues -> dense -> eigenvalues",
        ));

        let mut worst_pairing: f64 = 0.0;
        for _ in 0..50 {
            let q = random_pair_path(&mut rng, 3);
            let r = random_pair_path(&mut rng, 2);
            let dense = q.perp_lift(d).inner(&r.perp_lift(d));
            let weighted = q.inner_weighted(&r, d);
            worst_pairing = worst_pairing.max((dense - weighted).abs());
        }
        reports.push(CheckReport::new(
            "paths/weighted-pairing-identity",
            1e-12,
            worst_pairing,
            "<q_perp, r_perp> = (D-1)<q1,r1> + <q2,r2> on random paths",
        ));
    }

    {
        let mut rng = derive_rng(seed, &[tags::VERIFY, 5]);
        let mut worst: f64 = 0.0;
        for _ in 0..30 {
            let p = random_scalar_path(&mut rng, 3);
            let j = rng.gen_range(1..9usize);
            let x: Vec<f64> = (0..j).map(|_| rng.gen_range(0.0..2.0)).collect();
            let lhs = lift_scalar(&x).inner_step(&p);
            let proj = project_scalar(&p, j, Repair::None);
            let rhs = x
                .iter()
                .zip(&proj.coords)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / j as f64;
            worst = worst.max((lhs - rhs).abs());
        }
        reports.push(CheckReport::new(
            "paths/lift-project-adjoint",
            1e-12,
            worst,
            "<lift(x), p> = <x, project(p)>_j exactly",
        ));

        // Boundary behavior and isotonic repair.
        let c = 0.9;
        let proj = project_scalar(&ScalarPath::constant(c), 6, Repair::None);
        let boundary_dev = (proj.coords[5] - c / 2.0).abs();
        let mut repaired = proj.coords.clone();
        pava_nonneg(&mut repaired);
        let mut monotone = repaired.clone();
        pava_nonneg(&mut monotone);
        let idem = repaired
            .iter()
            .zip(&monotone)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        reports.push(CheckReport::new(
            "paths/projection-boundary-halves",
            1e-12,
            boundary_dev.max(idem),
            "constant path projects to (c,...,c,c/2); isotonic repair idempotent",
        ));

        // Reprojection error bound and its convergence rate. The bound is a
        // theorem per path; the O(1/j) rate is read off the mean error over
        // the sample (per-path constants fluctuate with how jumps align
        // against the uniform knots).
        let js = [4usize, 8, 16, 32, 64];
        let mut worst_excess: f64 = 0.0;
        let mut mean_errs = [0.0f64; 5];
        let n_paths = 12;
        for _ in 0..n_paths {
            let q = random_pair_path(&mut rng, 4);
            let sup = q
                .values()
                .iter()
                .map(|v| 0.5 * (v[0].abs() + v[1].abs()))
                .fold(0.0f64, f64::max);
            for (slot, &j) in js.iter().enumerate() {
                let proj = project_pair(&q, j, Repair::None);
                let lifts = lift_pair(&proj.coords);
                let err = 0.5
                    * (lifts[0].l1_distance_step(&q.component(0))
                        + lifts[1].l1_distance_step(&q.component(1)));
                worst_excess = worst_excess.max(err - 2.0 * sup / j as f64);
                mean_errs[slot] += err / n_paths as f64;
            }
        }
        let slope = log_log_slope(&js, &mean_errs);
        reports.push(CheckReport::new(
            "paths/reprojection-error-bound",
            1e-12,
            worst_excess,
            "L1 reprojection error <= 2 |q|_inf / j",
        ));
        reports.push(CheckReport::new(
            "paths/reprojection-rate",
            0.2,
            (slope - 1.0).abs(),
            format!("mean-error log-log slope {slope:.3} within [0.8, 1.2] across j = 4..64"),
        ));

        let mut worst_contract: f64 = 0.0;
        for _ in 0..30 {
            let j = rng.gen_range(1..10usize);
            let x: Vec<[f64; 2]> = (0..j)
                .map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)])
                .collect();
            let lifts = lift_pair(&x);
            let lhs = crate::paths::lifted_norm1_pair(&lifts);
            let rhs = crate::paths::disc_norm1_pair(&x);
            worst_contract = worst_contract.max(lhs - rhs);
        }
        reports.push(CheckReport::new(
            "paths/lift-contraction",
            1e-12,
            worst_contract,
            "|lift(x)|_L1 <= |x|_1",
        ));
    }

    if d >= 2 && invariant.invariant && convexity.midpoint_convex {
        let mut rng = derive_rng(seed, &[tags::VERIFY, 6]);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let q = random_pair_path(&mut rng, 3);
            for j in [2usize, 4, 8] {
                let rep = jensen_decrease_check(spec, &q, j)?;
                worst = worst.max(-rep.defect);
            }
        }
        reports.push(CheckReport::new(
            "paths/jensen-decrease",
            1e-10,
            worst,
            "∫ xi_perp(lift(project(q))) <= ∫ xi_perp(q)",
        ));
    }

    // ---- conjugate ----
    if !spec.formal() && spec.diagonal_only() {
        let f_star = |lambda: f64| -> Result<f64> {
            Ok(xi_dagger_scaled_star(spec, lambda, &conj_cfg)?.value)
        };
        let mut values = Vec::new();
        for k in 0..=16 {
            values.push(f_star(k as f64 * 0.25)?);
        }
        let mut worst: f64 = values[0].abs().max(-values[0]);
        for w in values.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
        for w in values.windows(3) {
            worst = worst.max(2.0 * w[1] - w[0] - w[2]);
        }
        reports.push(CheckReport::new(
            "conjugate/shape",
            1e-8,
            worst,
            "conjugate nonnegative, nondecreasing, midpoint-convex on a grid",
        ));

        // g** <= g on sampled points (the testable Fenchel-Moreau
        // direction).
        let dd = d as f64;
        let g = |mu: f64| spec.xi_dagger(mu / dd);
        let mut worst_fm: f64 = 0.0;
        for k in 1..=8 {
            let x = k as f64 * 0.25;
            let mut best = f64::NEG_INFINITY;
            for l in 0..=160 {
                let y = l as f64 * 0.05;
                best = best.max(x * y - f_star(y)?);
            }
            worst_fm = worst_fm.max(best - g(x));
        }
        reports.push(CheckReport::new(
            "conjugate/double-conjugate-below",
            1e-8,
            worst_fm,
            "g**(x) <= g(x) at sampled cone points",
        ));
    }

    if !spec.formal() && convexity.midpoint_convex {
        // Fenchel-Young through the conjugate machinery.
        let mut rng = derive_rng(seed, &[tags::VERIFY, 7]);
        let mut worst: f64 = 0.0;
        let mut cases = 0usize;
        for _ in 0..6 {
            if spec.diagonal_only() && invariant.invariant {
                let lambda = rng.gen_range(0.05..0.8);
                let a = DMatrix::from_diagonal_element(d, d, lambda);
                let theta = spec.theta(&a)?;
                let grad = spec.grad_xi(&a)?;
                // grad xi at lambda id_D is g id_D, and the PSD conjugate at
                // g id_D equals the scaled dagger conjugate at g.
                let star = xi_dagger_scaled_star(spec, grad[(0, 0)], &conj_cfg)?.value;
                worst = worst.max((star - theta).abs());
                cases += 1;
            } else if d == 2 {
                let a = crate::model::random_psd(2, &mut rng);
                let theta = spec.theta(&a)?;
                let grad = spec.grad_xi(&a)?;
                let star = xi_star_psd(spec, &PsdPoint::Dense(grad), &conj_cfg)?.value;
                worst = worst.max((star - theta).abs());
                cases += 1;
            }
        }
        if cases > 0 {
            reports.push(CheckReport::new(
                "conjugate/fenchel-young",
                1e-6,
                worst,
                "xi*(grad xi(a)) = theta(a) at sampled cone points",
            ));
        }
    }

    if d == 2 && invariant.invariant && convexity.midpoint_convex {
        let rep = check_perp_conjugate_identity(spec, 8, seed ^ 3, &conj_cfg)?;
        reports.push(CheckReport::new(
            "conjugate/perp-identity",
            1e-5,
            rep.max_rel_deviation,
            "xi_perp* = xi* . m on sampled points",
        ));
    }

    // ---- cascade ----
    if !spec.formal() {
        let quad = QuadratureConfig::auto(2.min(d * 2), seed);
        let zero = psi_scalar(&ScalarPath::zero(), &model.measure, &quad)?;
        reports.push(CheckReport::new(
            "cascade/psi-at-zero",
            1e-12,
            zero.value.abs(),
            "psi(0) = 0",
        ));

        let mut rng = derive_rng(seed, &[tags::VERIFY, 8]);
        let base = random_scalar_path(&mut rng, 2);
        let quad_k2 = QuadratureConfig::auto(gauss_dims_for(model, 2), seed);
        let quad_k3 = QuadratureConfig::auto(gauss_dims_for(model, 3), seed);
        let split = split_first_level(&base);
        let a = psi_scalar(&base, &model.measure, &quad_k2)?;
        let b = psi_scalar(&split, &model.measure, &quad_k3)?;
        reports.push(CheckReport::new(
            "cascade/level-merge-invariance",
            1e-9,
            (a.value - b.value).abs(),
            "duplicated level leaves psi unchanged",
        ));

        let mut worst_lip: f64 = 0.0;
        let mut worst_nonneg: f64 = 0.0;
        let mut worst_mono: f64 = 0.0;
        for _ in 0..6 {
            let p = random_scalar_path(&mut rng, 2);
            let q = random_scalar_path(&mut rng, 2);
            let vp = psi_scalar(&p, &model.measure, &quad_k2)?;
            let vq = psi_scalar(&q, &model.measure, &quad_k2)?;
            let dist = MatrixPath::diag_embed(&p, d).l1_distance(&MatrixPath::diag_embed(&q, d));
            worst_lip = worst_lip
                .max((vp.value - vq.value).abs() - dist - vp.quad_error - vq.quad_error);
            worst_nonneg = worst_nonneg.max(-vp.value);
            // Comparable pair: q plus a monotone bump.
            let bumped = add_bump(&p, 0.15);
            let vb = psi_scalar(&bumped, &model.measure, &quad_k2)?;
            worst_mono = worst_mono.max(vp.value - vb.value - vp.quad_error - vb.quad_error);
        }
        reports.push(CheckReport::new(
            "cascade/l1-lipschitz",
            1e-9,
            worst_lip,
            "|psi(q) - psi(q')| <= |q - q'|_L1",
        ));
        reports.push(CheckReport::new(
            "cascade/psi-nonnegative",
            1e-10,
            worst_nonneg,
            "psi >= 0 on monotone paths",
        ));
        reports.push(CheckReport::new(
            "cascade/psi-monotone",
            1e-9,
            worst_mono,
            "psi nondecreasing along the cone order",
        ));

        if d >= 2 && measure_invariant {
            let mut worst: f64 = 0.0;
            let quad_m = QuadratureConfig::auto(d * 2, seed);
            for _ in 0..3 {
                let q = random_pair_path(&mut rng, 2);
                // Break the eigenbasis symmetry with a diagonal monotone
                // bump so the permutation acts nontrivially.
                let mut values: Vec<DMatrix<f64>> = q.perp_lift(d).values().to_vec();
                for (l, v) in values.iter_mut().enumerate() {
                    v[(0, 0)] += 0.1 * (l + 1) as f64;
                }
                let path = MatrixPath::new(q.grid().to_vec(), values)?;
                let base = psi(&path, &model.measure, &quad_m)?;
                let perm: Vec<usize> = (0..d).rev().collect();
                let permuted = psi(&path.permuted(&perm), &model.measure, &quad_m)?;
                worst = worst
                    .max((base.value - permuted.value).abs() - base.quad_error - permuted.quad_error);
            }
            reports.push(CheckReport::new(
                "cascade/psi-permutation-invariant",
                1e-9,
                worst,
                "psi(q^s) = psi(q) for invariant P1",
            ));
        }

        if d >= 2 && model.measure.as_product().is_some() {
            let p = random_scalar_path(&mut rng, 2);
            let mut quad_fast = QuadratureConfig::auto(2, seed);
            quad_fast.product_fast_path = true;
            let mut quad_dense = QuadratureConfig::auto(d * 2, seed);
            quad_dense.product_fast_path = false;
            let fast = psi_scalar(&p, &model.measure, &quad_fast)?;
            let dense = psi_scalar(&p, &model.measure, &quad_dense)?;
            reports.push(CheckReport::new(
                "cascade/product-factorization",
                1e-8,
                (fast.value - dense.value).abs() - fast.quad_error - dense.quad_error,
                "coordinatewise cascade equals dense evaluation",
            ));
        }

        // Quantile round trip.
        let mu = DiscreteMeasure::new(vec![(0.1, 0.3), (0.4, 0.45), (0.9, 0.25)]).unwrap();
        let back = DiscreteMeasure::from_path(&quantile_path(&mu));
        let rt = if back == mu { 0.0 } else { 1.0 };
        reports.push(CheckReport::new(
            "cascade/quantile-roundtrip",
            0.0,
            rt,
            "induced measure of the quantile path is the measure itself",
        ));

        if d == 1 {
            let probe = concavity_probe(
                &model.measure,
                &DiscreteMeasure::dirac(0.2),
                &DiscreteMeasure::dirac(0.8),
                &[],
                &QuadratureConfig::auto(2, seed),
            )?;
            reports.push(CheckReport::new(
                "cascade/concavity-probe",
                0.0,
                (2.0 * probe.defect_error.max(1e-12) - probe.midpoint_defect).max(0.0),
                format!(
                    "midpoint defect {:.3e} exceeds twice the quadrature error",
                    probe.midpoint_defect
                ),
            ));
        }
    }

    // ---- parisi ----
    if !spec.formal() && spec.diagonal_only() && invariant.invariant && measure_invariant {
        let spec_obj = ObjectiveSpec::with_auto_quad(
            model.with_t(t_probe)?,
            Reduction::Scalar,
            1,
            seed,
            conj_cfg.clone(),
        )?;
        let v0 = spec_obj.objective_scalar(&ScalarPath::zero())?;
        reports.push(CheckReport::new(
            "parisi/objective-zero-path",
            1e-10,
            v0.abs(),
            "objective at the zero path is 0",
        ));

        // For a fixed path, t -> t sum dz xi*(p/t) is nonincreasing.
        let p = ScalarPath::new(vec![0.0, 0.5, 1.0], vec![0.2, 0.5])?;
        let term = |t: f64| -> Result<f64> {
            let mut acc = 0.0;
            for (w, &v) in p.grid().windows(2).zip(p.values()) {
                acc += (w[1] - w[0]) * xi_dagger_scaled_star(spec, v / t, &conj_cfg)?.value;
            }
            Ok(t * acc)
        };
        let mut worst: f64 = 0.0;
        let mut prev = term(0.125)?;
        for k in 1..=6 {
            let t = 0.125 * (k + 1) as f64;
            let cur = term(t)?;
            worst = worst.max(cur - prev);
            prev = cur;
        }
        reports.push(CheckReport::new(
            "parisi/conjugate-term-nonincreasing-in-t",
            1e-9,
            worst,
            "t |-> t ∫ xi*(p/t) is nonincreasing for fixed p",
        ));
    }

    // ---- simulate ----
    if !spec.formal() && spec.diagonal_only() {
        let n = if model.measure.atoms().len() > 2 { 3 } else { 5 };
        let cov = simulate::covariance_check(model, n, 3000, 3, seed ^ 4)?;
        reports.push(CheckReport::new(
            "simulate/covariance-identity",
            1.0,
            cov.worst_ratio,
            "empirical Cov(H) within 3 stderr of N xi(R)",
        ));

        let est0 = simulate::free_energy_mc(&model.with_t(0.0)?, n, 4, seed)?;
        reports.push(CheckReport::new(
            "simulate/zero-t-free-energy",
            0.0,
            est0.mean.abs(),
            "corrected free energy vanishes identically at t = 0",
        ));

        let ta = simulate::free_energy_mc(&model.with_t(t_probe)?, n, 16, seed ^ 5)?;
        let tb = simulate::free_energy_mc(&model.with_t(t_probe)?, n, 16, seed ^ 5)?;
        let det = if ta.mean.to_bits() == tb.mean.to_bits() { 0.0 } else { 1.0 };
        reports.push(CheckReport::new(
            "simulate/seed-determinism",
            0.0,
            det,
            "same seed, bit-identical estimate",
        ));
        reports.push(CheckReport::new(
            "simulate/jensen-lower-bound",
            0.0,
            (-ta.mean - 3.0 * ta.stderr).max(0.0),
            "estimate >= -3 stderr (annealed bound)",
        ));
    }

    Ok(reports)
}

/// Least-squares slope of `ln err` against `-ln j`.
pub fn log_log_slope(js: &[usize], errs: &[f64]) -> f64 {
    let n = js.len() as f64;
    let xs: Vec<f64> = js.iter().map(|&j| -((j as f64).ln())).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn gauss_dims_for(model: &ModelInstance, levels: usize) -> usize {
    if model.measure.as_product().is_some() {
        levels
    } else {
        model.dimension() * levels
    }
}

fn exponent_tuples(d: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; d];
    fn rec(d: usize, slot: usize, remaining: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slot == d {
            if current.iter().sum::<usize>() >= 1 {
                out.push(current.clone());
            }
            return;
        }
        for v in 0..=remaining {
            current[slot] = v;
            rec(d, slot + 1, remaining - v, current, out);
        }
        current[slot] = 0;
    }
    rec(d, 0, max_total, &mut current, &mut out);
    out
}

fn random_scalar_path(rng: &mut impl Rng, levels: usize) -> ScalarPath {
    let mut cuts: Vec<f64> = (0..levels - 1).map(|_| rng.gen_range(0.05..0.95)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut grid = vec![0.0];
    grid.extend(cuts);
    grid.push(1.0);
    let k = grid.len() - 1;
    let mut acc = 0.0;
    let values = (0..k)
        .map(|_| {
            acc += rng.gen_range(0.0..0.5);
            acc
        })
        .collect();
    ScalarPath::new(grid, values).unwrap()
}

fn random_pair_path(rng: &mut impl Rng, levels: usize) -> PairPath {
    let mut cuts: Vec<f64> = (0..levels - 1).map(|_| rng.gen_range(0.05..0.95)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut grid = vec![0.0];
    grid.extend(cuts);
    grid.push(1.0);
    let k = grid.len() - 1;
    let mut acc = [0.0f64; 2];
    let values = (0..k)
        .map(|_| {
            acc[0] += rng.gen_range(0.0..0.5);
            acc[1] += rng.gen_range(0.0..0.5);
            acc
        })
        .collect();
    PairPath::new(grid, values).unwrap()
}

fn split_first_level(p: &ScalarPath) -> ScalarPath {
    let mut grid = p.grid().to_vec();
    let mut values = p.values().to_vec();
    let mid = 0.5 * (grid[0] + grid[1]);
    grid.insert(1, mid);
    values.insert(0, values[0]);
    ScalarPath::new(grid, values).unwrap()
}

fn add_bump(p: &ScalarPath, bump: f64) -> ScalarPath {
    ScalarPath::new(
        p.grid().to_vec(),
        p.values().iter().map(|v| v + bump).collect(),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn potts_suite_passes() {
        let reports = run_verify(&presets::potts(2), 42).unwrap();
        for r in &reports {
            assert!(r.passed, "{}: margin {} tol {} ({})", r.name, r.margin, r.tolerance, r.detail);
        }
    }

    #[test]
    fn sk_suite_passes() {
        let reports = run_verify(&presets::sk().with_t(0.4).unwrap(), 7).unwrap();
        for r in &reports {
            assert!(r.passed, "{}: margin {} tol {} ({})", r.name, r.margin, r.tolerance, r.detail);
        }
    }

    #[test]
    fn formal_cubic_gates_hold() {
        let reports = run_verify(&presets::formal_cubic(), 3).unwrap();
        let gates = reports
            .iter()
            .find(|r| r.name == "model/formal-gates")
            .expect("gate check present");
        assert!(gates.passed, "{}", gates.detail);
        for r in &reports {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
