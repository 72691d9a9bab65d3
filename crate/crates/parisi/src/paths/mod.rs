//! Monotone step paths on cones and exact piecewise integration.
//!
//! A step path takes the value `values[l]` on `[grid[l], grid[l+1])` with
//! the implicit value 0 before `grid[0] = 0`; grids always end at exactly 1.
//! Lifted (piecewise-linear) paths carry their breakpoints. All inner
//! products and norms of these representations are computed segment by
//! segment in closed form.

mod lambda;
mod perm;

pub use lambda::{
    disc_norm1_pair, integrate_xi_perp_lifted, jensen_decrease_check, lift_pair, lift_scalar,
    lifted_norm1_pair, pava_nonneg, project_pair, project_scalar, DiscretePair, JensenReport,
    Projected, PwLinear, Repair,
};
pub use perm::{permutation_deviation, PermMatrix};

use crate::{Error, Result};
use nalgebra::DMatrix;

/// Tolerance below which monotonicity violations are treated as rounding
/// and clipped away.
pub const MONOTONE_TOL: f64 = 1e-10;

fn validate_grid(grid: &[f64], levels: usize) -> Result<()> {
    if grid.len() != levels + 1 {
        return Err(Error::InvalidPath(format!(
            "grid has {} points for {} levels; need levels + 1",
            grid.len(),
            levels
        )));
    }
    if grid[0] != 0.0 || grid[levels] != 1.0 {
        return Err(Error::InvalidPath(
            "grid must start at exactly 0 and end at exactly 1".into(),
        ));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidPath(format!(
                "grid is not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn level_of(grid: &[f64], u: f64) -> usize {
    // Value index l such that u lies in [grid[l], grid[l+1]).
    match grid.partition_point(|&g| g <= u) {
        0 => 0,
        k => (k - 1).min(grid.len() - 2),
    }
}

/// Scalar monotone step path on `R_+`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPath {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl ScalarPath {
    pub fn new(grid: Vec<f64>, mut values: Vec<f64>) -> Result<ScalarPath> {
        validate_grid(&grid, values.len())?;
        let mut prev = 0.0;
        for (l, v) in values.iter_mut().enumerate() {
            if *v < prev - MONOTONE_TOL {
                return Err(Error::NonMonotonePath {
                    level: l,
                    min_eig: *v - prev,
                });
            }
            *v = v.max(prev);
            prev = *v;
        }
        Ok(ScalarPath { grid, values })
    }

    /// Constant path `value` on [0, 1).
    pub fn constant(value: f64) -> ScalarPath {
        ScalarPath::new(vec![0.0, 1.0], vec![value]).expect("constant path is valid")
    }

    pub fn zero() -> ScalarPath {
        ScalarPath::constant(0.0)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn value_at(&self, u: f64) -> f64 {
        self.values[level_of(&self.grid, u)]
    }

    /// Last value, i.e. the path value at 1-.
    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn l1_norm(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (w[1] - w[0]) * v.abs())
            .sum()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Exact L1 distance; this is also the Wasserstein-1 distance between
    /// the induced measures of two monotone paths.
    pub fn l1_distance(&self, other: &ScalarPath) -> f64 {
        merged_grid(&self.grid, &other.grid)
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (w[1] - w[0]) * (self.value_at(mid) - other.value_at(mid)).abs()
            })
            .sum()
    }

    /// Exact `∫ p q du` against another step path.
    pub fn inner(&self, other: &ScalarPath) -> f64 {
        merged_grid(&self.grid, &other.grid)
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (w[1] - w[0]) * self.value_at(mid) * other.value_at(mid)
            })
            .sum()
    }

    /// Pointwise clamp to `[0, cap]` (stays monotone).
    pub fn clamped(&self, cap: f64) -> ScalarPath {
        ScalarPath::new(
            self.grid.clone(),
            self.values.iter().map(|v| v.min(cap)).collect(),
        )
        .expect("clamping preserves validity")
    }
}

/// Monotone step path on `R_+^2` in eigenvalue coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPath {
    grid: Vec<f64>,
    values: Vec<[f64; 2]>,
}

impl PairPath {
    pub fn new(grid: Vec<f64>, mut values: Vec<[f64; 2]>) -> Result<PairPath> {
        validate_grid(&grid, values.len())?;
        let mut prev = [0.0f64; 2];
        for (l, v) in values.iter_mut().enumerate() {
            for c in 0..2 {
                if v[c] < prev[c] - MONOTONE_TOL {
                    return Err(Error::NonMonotonePath {
                        level: l,
                        min_eig: v[c] - prev[c],
                    });
                }
                v[c] = v[c].max(prev[c]);
            }
            prev = *v;
        }
        Ok(PairPath { grid, values })
    }

    pub fn constant(value: [f64; 2]) -> PairPath {
        PairPath::new(vec![0.0, 1.0], vec![value]).expect("constant path is valid")
    }

    pub fn zero() -> PairPath {
        PairPath::constant([0.0, 0.0])
    }

    /// Embeds a scalar path diagonally as `(p, p)`.
    pub fn from_scalar(p: &ScalarPath) -> PairPath {
        PairPath {
            grid: p.grid.clone(),
            values: p.values.iter().map(|&v| [v, v]).collect(),
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn value_at(&self, u: f64) -> [f64; 2] {
        self.values[level_of(&self.grid, u)]
    }

    pub fn component(&self, c: usize) -> ScalarPath {
        ScalarPath {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v[c]).collect(),
        }
    }

    /// `sup_u max(|v1|, |v2|)`.
    pub fn linf_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()))
    }

    /// Unweighted pairing `∫ (p1 q1 + p2 q2) du`.
    pub fn inner(&self, other: &PairPath) -> f64 {
        self.component(0).inner(&other.component(0)) + self.component(1).inner(&other.component(1))
    }

    /// The `(D-1, 1)`-weighted pairing matching the Frobenius pairing of the
    /// lifted matrix paths.
    pub fn inner_weighted(&self, other: &PairPath, d: usize) -> f64 {
        (d as f64 - 1.0) * self.component(0).inner(&other.component(0))
            + self.component(1).inner(&other.component(1))
    }

    /// Componentwise L1 distance `∫ (|Δv1| + |Δv2|) du`.
    pub fn l1_distance(&self, other: &PairPath) -> f64 {
        self.component(0).l1_distance(&other.component(0))
            + self.component(1).l1_distance(&other.component(1))
    }

    /// Lifts to the permutation-invariant PSD matrix path
    /// `u -> m(v1(u), v2(u))`.
    pub fn perp_lift(&self, d: usize) -> MatrixPath {
        let values = self
            .values
            .iter()
            .map(|&[l1, l2]| PermMatrix::new(d, l1, l2).to_dense())
            .collect();
        MatrixPath {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Monotone step path on the PSD cone.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    grid: Vec<f64>,
    values: Vec<DMatrix<f64>>,
}

impl MatrixPath {
    pub fn new(grid: Vec<f64>, values: Vec<DMatrix<f64>>) -> Result<MatrixPath> {
        validate_grid(&grid, values.len())?;
        let d = values
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::InvalidPath("matrix path needs at least one level".into()))?;
        let mut prev = DMatrix::<f64>::zeros(d, d);
        for (l, v) in values.iter().enumerate() {
            if v.nrows() != d || v.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.nrows().max(v.ncols()),
                });
            }
            let incr = v - &prev;
            let min_eig = min_eigenvalue(&incr);
            if min_eig < -MONOTONE_TOL {
                return Err(Error::NonMonotonePath { level: l, min_eig });
            }
            prev = v.clone();
        }
        Ok(MatrixPath { grid, values })
    }

    /// Diagonal embedding `p id_D` of a scalar path.
    pub fn diag_embed(p: &ScalarPath, d: usize) -> MatrixPath {
        MatrixPath {
            grid: p.grid.clone(),
            values: p
                .values
                .iter()
                .map(|&v| DMatrix::from_diagonal_element(d, d, v))
                .collect(),
        }
    }

    pub fn zero(d: usize) -> MatrixPath {
        MatrixPath {
            grid: vec![0.0, 1.0],
            values: vec![DMatrix::zeros(d, d)],
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn value_at(&self, u: f64) -> &DMatrix<f64> {
        &self.values[level_of(&self.grid, u)]
    }

    /// Applies a simultaneous index relabeling to every level.
    pub fn permuted(&self, perm: &[usize]) -> MatrixPath {
        let d = self.dim();
        let values = self
            .values
            .iter()
            .map(|m| DMatrix::from_fn(d, d, |i, j| m[(perm[i], perm[j])]))
            .collect();
        MatrixPath {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Frobenius pairing `∫ q(u) . r(u) du`.
    pub fn inner(&self, other: &MatrixPath) -> f64 {
        merged_grid(&self.grid, &other.grid)
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let a = self.value_at(mid);
                let b = other.value_at(mid);
                (w[1] - w[0]) * frob_dot(a, b)
            })
            .sum()
    }

    /// `∫ |q(u) - r(u)|_F du`, exact for step paths.
    pub fn l1_distance(&self, other: &MatrixPath) -> f64 {
        merged_grid(&self.grid, &other.grid)
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (w[1] - w[0]) * (self.value_at(mid) - other.value_at(mid)).norm()
            })
            .sum()
    }

    /// Reduces a permutation-invariant PSD path to eigenvalue coordinates;
    /// inverse of [`PairPath::perp_lift`] within `tol`.
    pub fn reduce_invariant(&self, tol: f64) -> Result<PairPath> {
        let mut values = Vec::with_capacity(self.values.len());
        for (level, m) in self.values.iter().enumerate() {
            let dev = permutation_deviation(m);
            if dev > tol {
                return Err(Error::NotPermutationInvariant {
                    level,
                    deviation: dev,
                });
            }
            let pm = PermMatrix::from_dense(m, f64::INFINITY).expect("dims checked");
            values.push([pm.lambda1(), pm.lambda2()]);
        }
        PairPath::new(self.grid.clone(), values)
    }
}

pub(crate) fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut dot = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            dot += a[(i, j)] * b[(i, j)];
        }
    }
    dot
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

pub(crate) fn merged_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(ScalarPath::new(vec![0.0, 0.5], vec![1.0]).is_err());
        assert!(ScalarPath::new(vec![0.1, 1.0], vec![1.0]).is_err());
        assert!(ScalarPath::new(vec![0.0, 0.5, 0.5, 1.0], vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn rejects_decreasing_values() {
        assert!(matches!(
            ScalarPath::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.5]),
            Err(Error::NonMonotonePath { level: 1, .. })
        ));
    }

    #[test]
    fn clips_rounding_noise() {
        let p = ScalarPath::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.0 - 1e-12]).unwrap();
        assert_eq!(p.values()[1], 1.0);
    }

    #[test]
    fn value_lookup_is_right_continuous() {
        let p = ScalarPath::new(vec![0.0, 0.25, 1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(p.value_at(0.0), 1.0);
        assert_eq!(p.value_at(0.25), 2.0);
        assert_eq!(p.value_at(0.9999), 2.0);
    }

    #[test]
    fn step_inner_products_are_exact() {
        let p = ScalarPath::new(vec![0.0, 0.5, 1.0], vec![1.0, 3.0]).unwrap();
        let q = ScalarPath::new(vec![0.0, 0.25, 1.0], vec![2.0, 4.0]).unwrap();
        // ∫ = 0.25*1*2 + 0.25*1*4 + 0.5*3*4 = 0.5 + 1 + 6.
        assert!((p.inner(&q) - 7.5).abs() < 1e-15);
        assert!((ScalarPath::constant(1.0).inner(&ScalarPath::constant(1.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perp_lift_reduce_round_trip() {
        let q = PairPath::new(vec![0.0, 0.3, 1.0], vec![[0.2, 0.5], [0.7, 1.1]]).unwrap();
        for d in [2usize, 3, 5] {
            let lifted = q.perp_lift(d);
            let back = lifted.reduce_invariant(1e-12).unwrap();
            assert_eq!(back.levels(), 2);
            for (a, b) in back.values().iter().zip(q.values()) {
                assert!((a[0] - b[0]).abs() < 1e-12);
                assert!((a[1] - b[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduce_rejects_non_invariant_level() {
        let level = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let path = MatrixPath::new(vec![0.0, 1.0], vec![level]).unwrap();
        match path.reduce_invariant(1e-9) {
            Err(Error::NotPermutationInvariant { level: 0, deviation }) => {
                assert!(deviation > 0.4);
            }
            other => panic!("expected invariance error, got {other:?}"),
        }
    }

    #[test]
    fn matrix_monotonicity_enforced() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]);
        assert!(matches!(
            MatrixPath::new(vec![0.0, 0.5, 1.0], vec![a, b]),
            Err(Error::NonMonotonePath { level: 1, .. })
        ));
    }

    #[test]
    fn weighted_pairing_matches_lift() {
        let q = PairPath::new(vec![0.0, 0.4, 1.0], vec![[0.1, 0.3], [0.2, 0.9]]).unwrap();
        let r = PairPath::new(vec![0.0, 0.7, 1.0], vec![[0.5, 0.1], [0.8, 0.4]]).unwrap();
        for d in [2usize, 3, 5] {
            let dense = q.perp_lift(d).inner(&r.perp_lift(d));
            assert!((dense - q.inner_weighted(&r, d)).abs() < 1e-12);
        }
    }
}
