//! Piecewise-linear lifts and adjoint projections between step paths and
//! monotone vectors.
//!
//! The lift of `x = (x_1, ..., x_j)` interpolates `(0,0), (1/j, x_1), ...,
//! (1, x_j)`; equivalently it is `sum_i x_i hat_i` over the hat functions
//! supported on `[(i-1)/j, (i+1)/j)`. The projection takes exact inner
//! products against `j hat_i`. The pair `(lift, project)` is adjoint for the
//! normalized inner products: `(1/j) sum x_i . y_i` on vectors with the
//! half-sum dot on value pairs.
//!
//! The boundary hat `hat_j` carries mass `1/(2j)` only, so projecting even a
//! constant path yields a final coordinate `c/2` that breaks monotonicity.
//! Both the literal adjoint and an isotonic-repaired variant are exposed;
//! every projection reports its worst monotonicity violation.

use super::{merged_grid, PairPath, ScalarPath};
use crate::model::CovarianceSpec;
use crate::quadrature::gauss_legendre_unit;
use crate::Result;
use serde::Serialize;

/// Whether to repair projections back into the monotone cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repair {
    None,
    Isotonic,
}

/// Continuous piecewise-linear path on `[0, 1]`, stored by its knot values.
#[derive(Debug, Clone, PartialEq)]
pub struct PwLinear {
    knots: Vec<f64>,
    vals: Vec<f64>,
}

impl PwLinear {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn eval(&self, u: f64) -> f64 {
        let k = match self.knots.partition_point(|&g| g <= u) {
            0 => 0,
            k => (k - 1).min(self.knots.len() - 2),
        };
        let (a, b) = (self.knots[k], self.knots[k + 1]);
        let s = (u - a) / (b - a);
        self.vals[k] * (1.0 - s) + self.vals[k + 1] * s
    }

    /// Exact `∫_0^1 |f|` (each segment is affine; split at sign changes).
    pub fn l1_norm(&self) -> f64 {
        let mut total = 0.0;
        for k in 0..self.knots.len() - 1 {
            total += abs_affine_integral(
                self.knots[k],
                self.knots[k + 1],
                self.vals[k],
                self.vals[k + 1],
            );
        }
        total
    }

    /// Exact `∫ f p` against a step path.
    pub fn inner_step(&self, p: &ScalarPath) -> f64 {
        let grid = merged_grid(&self.knots, p.grid());
        let mut total = 0.0;
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let avg = 0.5 * (self.eval(a) + self.eval(b.min(1.0)));
            total += (b - a) * avg * p.value_at(mid.min(1.0 - 1e-15));
        }
        total
    }

    /// Exact `∫ |f - p|` against a step path.
    pub fn l1_distance_step(&self, p: &ScalarPath) -> f64 {
        let grid = merged_grid(&self.knots, p.grid());
        let mut total = 0.0;
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let c = p.value_at((0.5 * (a + b)).min(1.0 - 1e-15));
            total += abs_affine_integral(a, b, self.eval(a) - c, self.eval(b.min(1.0)) - c);
        }
        total
    }
}

/// `∫_a^b |f|` for the affine `f` with `f(a) = fa`, `f(b) = fb`.
fn abs_affine_integral(a: f64, b: f64, fa: f64, fb: f64) -> f64 {
    let len = b - a;
    if fa >= 0.0 && fb >= 0.0 {
        0.5 * (fa + fb) * len
    } else if fa <= 0.0 && fb <= 0.0 {
        -0.5 * (fa + fb) * len
    } else {
        // One sign change; split at the root.
        let root = fa / (fa - fb);
        0.5 * len * (fa.abs() * root + fb.abs() * (1.0 - root))
    }
}

/// The lift of a coordinate vector: linear interpolation through
/// `(0, 0), (1/j, x_1), ..., (1, x_j)`.
pub fn lift_scalar(x: &[f64]) -> PwLinear {
    let j = x.len();
    assert!(j >= 1, "lift needs at least one coordinate");
    let mut knots = Vec::with_capacity(j + 1);
    let mut vals = Vec::with_capacity(j + 1);
    knots.push(0.0);
    vals.push(0.0);
    for (i, &v) in x.iter().enumerate() {
        knots.push((i + 1) as f64 / j as f64);
        vals.push(v);
    }
    PwLinear { knots, vals }
}

/// Componentwise lift of pair coordinates.
pub fn lift_pair(x: &[[f64; 2]]) -> [PwLinear; 2] {
    let c0: Vec<f64> = x.iter().map(|v| v[0]).collect();
    let c1: Vec<f64> = x.iter().map(|v| v[1]).collect();
    [lift_scalar(&c0), lift_scalar(&c1)]
}

/// Result of a projection, carrying the literal coordinates and the worst
/// monotonicity violation before any repair.
#[derive(Debug, Clone, Serialize)]
pub struct Projected<T> {
    pub coords: Vec<T>,
    pub max_violation: f64,
}

/// `(<p, j hat_i>)_i` by exact piecewise integration; `repair` optionally
/// projects the result onto the monotone nonnegative cone in least squares.
pub fn project_scalar(p: &ScalarPath, j: usize, repair: Repair) -> Projected<f64> {
    assert!(j >= 1, "projection needs at least one coordinate");
    let jf = j as f64;
    let mut coords = Vec::with_capacity(j);
    for i in 1..=j {
        let left = (i - 1) as f64 / jf;
        let mid = i as f64 / jf;
        // Rising ramp of j*hat_i on [left, mid): 0 -> j.
        let mut v = step_affine_integral(p, left, mid, 0.0, jf);
        // Falling ramp on [mid, right) for i < j.
        if i < j {
            let right = (i + 1) as f64 / jf;
            v += step_affine_integral(p, mid, right, jf, 0.0);
        }
        coords.push(v);
    }
    let mut max_violation = 0.0f64;
    let mut prev = 0.0f64;
    for &c in &coords {
        max_violation = max_violation.max(prev - c).max(-c);
        prev = c;
    }
    if repair == Repair::Isotonic {
        pava_nonneg(&mut coords);
    }
    Projected {
        coords,
        max_violation,
    }
}

/// Componentwise projection of a pair path.
pub fn project_pair(q: &PairPath, j: usize, repair: Repair) -> Projected<[f64; 2]> {
    let a = project_scalar(&q.component(0), j, repair);
    let b = project_scalar(&q.component(1), j, repair);
    Projected {
        coords: a
            .coords
            .into_iter()
            .zip(b.coords)
            .map(|(x, y)| [x, y])
            .collect(),
        max_violation: a.max_violation.max(b.max_violation),
    }
}

/// `∫_a^b p(u) f(u) du` where `f` is affine with endpoint values `fa`, `fb`
/// and `p` is a step path; exact.
fn step_affine_integral(p: &ScalarPath, a: f64, b: f64, fa: f64, fb: f64) -> f64 {
    let mut cut: Vec<f64> = p
        .grid()
        .iter()
        .copied()
        .filter(|&g| g > a && g < b)
        .collect();
    cut.insert(0, a);
    cut.push(b);
    let slope = (fb - fa) / (b - a);
    let mut total = 0.0;
    for w in cut.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        let v = p.value_at((0.5 * (u0 + u1)).min(1.0 - 1e-15));
        let f0 = fa + slope * (u0 - a);
        let f1 = fa + slope * (u1 - a);
        total += v * 0.5 * (f0 + f1) * (u1 - u0);
    }
    total
}

/// Pool-adjacent-violators with uniform weights, then a final clamp at 0;
/// the least-squares projection onto `{0 <= x_1 <= ... <= x_j}`.
pub fn pava_nonneg(x: &mut Vec<f64>) {
    let n = x.len();
    let mut level: Vec<f64> = Vec::with_capacity(n);
    let mut count: Vec<usize> = Vec::with_capacity(n);
    for &v in x.iter() {
        let mut cur_level = v;
        let mut cur_count = 1usize;
        while let Some(&last) = level.last() {
            if last <= cur_level {
                break;
            }
            let last_count = count.pop().unwrap();
            level.pop();
            cur_level = (last * last_count as f64 + cur_level * cur_count as f64)
                / (last_count + cur_count) as f64;
            cur_count += last_count;
        }
        level.push(cur_level);
        count.push(cur_count);
    }
    let mut out = Vec::with_capacity(n);
    for (lv, ct) in level.iter().zip(&count) {
        for _ in 0..*ct {
            out.push(lv.max(0.0));
        }
    }
    *x = out;
}

/// Both sides of the approximation-decrease inequality
/// `∫ xi_perp(lift(project(q))) <= ∫ xi_perp(q)`.
#[derive(Debug, Clone, Serialize)]
pub struct JensenReport {
    pub reprojected_integral: f64,
    pub original_integral: f64,
    /// `original - reprojected`; nonnegative up to rounding for convex
    /// permutation-invariant specs.
    pub defect: f64,
}

/// Compares `∫ xi_perp` along a pair path before and after lift-project at
/// resolution `j`. Polynomial integrands are integrated exactly (Gauss rule
/// at the spec's degree).
pub fn jensen_decrease_check(spec: &CovarianceSpec, q: &PairPath, j: usize) -> Result<JensenReport> {
    let rhs: f64 = {
        let mut total = 0.0;
        for (w, v) in q.grid().windows(2).zip(q.values()) {
            total += (w[1] - w[0]) * spec.xi_perp(v[0], v[1])?;
        }
        total
    };
    let projected = project_pair(q, j, Repair::None);
    let lhs = integrate_xi_perp_lifted(spec, &projected.coords)?;
    Ok(JensenReport {
        reprojected_integral: lhs,
        original_integral: rhs,
        defect: rhs - lhs,
    })
}

/// `∫_0^1 xi_perp(lift(x))` exactly: the integrand is a polynomial of the
/// spec's total degree on each subinterval.
pub fn integrate_xi_perp_lifted(spec: &CovarianceSpec, x: &[[f64; 2]]) -> Result<f64> {
    let degree = spec.max_degree().max(1);
    let rule = gauss_legendre_unit(degree / 2 + 1);
    let j = x.len();
    let jf = j as f64;
    let mut total = 0.0;
    let mut prev = [0.0f64; 2];
    for &next in x {
        let mut seg = 0.0;
        for (node, weight) in rule.nodes.iter().zip(&rule.weights) {
            let v0 = prev[0] + (next[0] - prev[0]) * node;
            let v1 = prev[1] + (next[1] - prev[1]) * node;
            seg += weight * spec.xi_perp(v0, v1)?;
        }
        total += seg / jf;
        prev = next;
    }
    Ok(total)
}

/// Normalized vector norm `(1/j) sum_i (|x1| + |x2|) / 2`.
pub fn disc_norm1_pair(x: &[[f64; 2]]) -> f64 {
    let j = x.len() as f64;
    x.iter().map(|v| 0.5 * (v[0].abs() + v[1].abs())).sum::<f64>() / j
}

/// Normalized L1 norm of a lifted pair: the half-sum of component norms.
pub fn lifted_norm1_pair(lift: &[PwLinear; 2]) -> f64 {
    0.5 * (lift[0].l1_norm() + lift[1].l1_norm())
}

/// A monotone nonnegative coordinate vector in the discrete cone.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePair {
    x: Vec<[f64; 2]>,
}

impl DiscretePair {
    pub fn new(x: Vec<[f64; 2]>) -> Result<DiscretePair> {
        let mut prev = [0.0f64; 2];
        for (i, v) in x.iter().enumerate() {
            for c in 0..2 {
                if v[c] < prev[c] - super::MONOTONE_TOL {
                    return Err(crate::Error::NonMonotonePath {
                        level: i,
                        min_eig: v[c] - prev[c],
                    });
                }
            }
            prev = *v;
        }
        Ok(DiscretePair { x })
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn lift_of_single_level_is_diagonal() {
        let lift = lift_scalar(&[1.0]);
        for u in [0.0, 0.25, 0.5, 1.0] {
            assert!((lift.eval(u) - u).abs() < 1e-15);
        }
    }

    #[test]
    fn lift_flattens_after_repeated_values() {
        // x = (1, 1): rises linearly on [0, 1/2], constant 1 after.
        let lift = lift_scalar(&[1.0, 1.0]);
        assert!((lift.eval(0.25) - 0.5).abs() < 1e-15);
        assert!((lift.eval(0.75) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_of_zero_and_constant() {
        let zero = ScalarPath::zero();
        let proj = project_scalar(&zero, 4, Repair::None);
        assert!(proj.coords.iter().all(|&c| c.abs() < 1e-15));

        // Constant c: (c, ..., c, c/2) because the boundary hat carries
        // half the mass.
        let c = 0.8;
        let proj = project_scalar(&ScalarPath::constant(c), 5, Repair::None);
        for &v in &proj.coords[..4] {
            assert!((v - c).abs() < 1e-13);
        }
        assert!((proj.coords[4] - c / 2.0).abs() < 1e-13);
        assert!(proj.max_violation > 0.3);
    }

    #[test]
    fn isotonic_repair_is_identity_on_monotone() {
        let mut x = vec![0.1, 0.4, 0.4, 0.9];
        let orig = x.clone();
        pava_nonneg(&mut x);
        assert_eq!(x, orig);
    }

    #[test]
    fn isotonic_repair_pools_violators() {
        let mut x = vec![1.0, 3.0, 2.0];
        pava_nonneg(&mut x);
        assert_eq!(x, vec![1.0, 2.5, 2.5]);
        let mut y = vec![-2.0, -1.0, 1.0];
        pava_nonneg(&mut y);
        assert_eq!(y, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn adjointness_is_exact() {
        // <lift(x), p>_{L2} = <x, project(p)>_j for step p, any x.
        let p = ScalarPath::new(vec![0.0, 0.2, 0.55, 1.0], vec![0.3, 1.1, 2.0]).unwrap();
        for j in [1usize, 3, 7] {
            let x: Vec<f64> = (0..j).map(|i| ((i * 7 + 3) % 5) as f64 * 0.3).collect();
            let lhs = lift_scalar(&x).inner_step(&p);
            let proj = project_scalar(&p, j, Repair::None);
            let rhs: f64 = x
                .iter()
                .zip(&proj.coords)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / j as f64;
            assert!((lhs - rhs).abs() < 1e-14, "j={j}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn lift_contraction_in_l1() {
        let x = vec![[0.5, 0.2], [0.6, 1.4], [0.1, 2.0]];
        let lifted = lift_pair(&x);
        assert!(lifted_norm1_pair(&lifted) <= disc_norm1_pair(&x) + 1e-15);
    }

    #[test]
    fn jensen_decrease_on_potts() {
        let spec = presets::potts(2).covariance;
        let q = PairPath::new(
            vec![0.0, 0.3, 0.7, 1.0],
            vec![[0.1, 0.2], [0.5, 0.6], [0.9, 1.3]],
        )
        .unwrap();
        for j in [2usize, 4, 8] {
            let report = jensen_decrease_check(&spec, &q, j).unwrap();
            assert!(
                report.defect >= -1e-10,
                "j={j}: defect {}",
                report.defect
            );
        }
        // Zero path: both integrals vanish.
        let report = jensen_decrease_check(&spec, &PairPath::zero(), 4).unwrap();
        assert_eq!(report.original_integral, 0.0);
        assert!(report.reprojected_integral.abs() < 1e-15);
    }

    #[test]
    fn reprojection_error_bound() {
        // |q - lift(project(q))|_{L1} <= 2 |q|_inf / j on monotone paths.
        let q = ScalarPath::new(vec![0.0, 0.21, 0.49, 0.77, 1.0], vec![0.2, 0.9, 1.4, 1.9])
            .unwrap();
        for j in [2usize, 4, 8, 16] {
            let proj = project_scalar(&q, j, Repair::None);
            let err = lift_scalar(&proj.coords).l1_distance_step(&q);
            assert!(err <= 2.0 * q.linf_norm() / j as f64 + 1e-13);
        }
    }
}
