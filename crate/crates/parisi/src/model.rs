//! Interaction functions and reference measures.
//!
//! An interaction function `xi` is a polynomial in the entries of a D x D
//! overlap matrix, stored as a list of monomials in canonical form. The
//! reference measure `P1` is finitely supported inside the unit ball. The
//! module also houses the derived functions `xi_dagger`, `xi_perp`,
//! `cap_xi`, `theta`, symmetrization, and the structural diagnostics
//! (permutation invariance, sampled convexity, monomial inequalities).

use crate::paths::PermMatrix;
use crate::rng::{derive_rng, tags};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One monomial `coeff * prod R[d][d']` over a multiset of entry pairs.
///
/// Entry indices are 0-based internally; the file format is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub entries: Vec<(usize, usize)>,
    pub coeff: f64,
}

impl Monomial {
    fn canonicalize(&mut self) {
        self.entries.sort_unstable();
    }

    pub fn degree(&self) -> usize {
        self.entries.len()
    }
}

/// A polynomial interaction function on D x D matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    dimension: usize,
    monomials: Vec<Monomial>,
    diagonal_only: bool,
    formal: bool,
}

impl CovarianceSpec {
    /// Builds a spec in canonical form (sorted entries, sorted monomials,
    /// duplicates merged, zero coefficients dropped).
    pub fn new(
        dimension: usize,
        monomials: Vec<Monomial>,
        formal: bool,
    ) -> Result<CovarianceSpec> {
        if dimension == 0 {
            return Err(Error::InvalidModel("dimension must be >= 1".into()));
        }
        for m in &monomials {
            if m.entries.is_empty() {
                return Err(Error::InvalidModel(
                    "constant monomials are not allowed (xi(0) must be 0)".into(),
                ));
            }
            if !m.coeff.is_finite() {
                return Err(Error::InvalidModel("non-finite coefficient".into()));
            }
            for &(d, dp) in &m.entries {
                if d >= dimension || dp >= dimension {
                    return Err(Error::InvalidModel(format!(
                        "entry index ({},{}) out of range for D = {}",
                        d + 1,
                        dp + 1,
                        dimension
                    )));
                }
            }
            if !formal && m.coeff < 0.0 {
                return Err(Error::InvalidModel(
                    "negative coefficient on a non-formal spec".into(),
                ));
            }
        }
        let mut monomials = monomials;
        for m in &mut monomials {
            m.canonicalize();
        }
        monomials.sort_by(|a, b| a.entries.cmp(&b.entries));
        let mut merged: Vec<Monomial> = Vec::with_capacity(monomials.len());
        for m in monomials {
            match merged.last_mut() {
                Some(last) if last.entries == m.entries => last.coeff += m.coeff,
                _ => merged.push(m),
            }
        }
        merged.retain(|m| m.coeff != 0.0);
        let diagonal_only = merged
            .iter()
            .all(|m| m.entries.iter().all(|&(d, dp)| d == dp));
        Ok(CovarianceSpec {
            dimension,
            monomials: merged,
            diagonal_only,
            formal,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn diagonal_only(&self) -> bool {
        self.diagonal_only
    }

    pub fn formal(&self) -> bool {
        self.formal
    }

    /// Smallest total degree among monomials (0 for the zero polynomial).
    pub fn min_degree(&self) -> usize {
        self.monomials.iter().map(Monomial::degree).min().unwrap_or(0)
    }

    pub fn max_degree(&self) -> usize {
        self.monomials.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    fn check_dims(&self, r: &DMatrix<f64>) -> Result<()> {
        if r.nrows() != self.dimension || r.ncols() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: r.nrows().max(r.ncols()),
            });
        }
        Ok(())
    }

    /// Evaluates `xi(R)`.
    pub fn eval_xi(&self, r: &DMatrix<f64>) -> Result<f64> {
        self.check_dims(r)?;
        let mut total = 0.0;
        for m in &self.monomials {
            let mut term = m.coeff;
            for &(d, dp) in &m.entries {
                term *= r[(d, dp)];
            }
            total += term;
        }
        Ok(total)
    }

    /// Evaluates a diagonal spec on a diagonal vector.
    pub fn eval_xi_diag(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        if !self.diagonal_only {
            return Err(Error::NotDiagonal);
        }
        let mut total = 0.0;
        for m in &self.monomials {
            let mut term = m.coeff;
            for &(d, _) in &m.entries {
                term *= x[d];
            }
            total += term;
        }
        Ok(total)
    }

    /// `xi_dagger(lambda) = xi(lambda id_D)` (the all-`lambda` diagonal).
    pub fn xi_dagger(&self, lambda: f64) -> f64 {
        self.monomials
            .iter()
            .map(|m| {
                let diag = m.entries.iter().all(|&(d, dp)| d == dp);
                if diag {
                    m.coeff * lambda.powi(m.degree() as i32)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Power-series coefficients of `xi_dagger` by total degree:
    /// `(degree, coefficient)` with degree >= 1, diagonal monomials only.
    pub fn xi_dagger_coeffs(&self) -> Vec<(usize, f64)> {
        let mut by_degree: Vec<(usize, f64)> = Vec::new();
        for m in &self.monomials {
            if !m.entries.iter().all(|&(d, dp)| d == dp) {
                continue;
            }
            let deg = m.degree();
            match by_degree.iter_mut().find(|(d, _)| *d == deg) {
                Some((_, c)) => *c += m.coeff,
                None => by_degree.push((deg, m.coeff)),
            }
        }
        by_degree.sort_unstable_by_key(|&(d, _)| d);
        by_degree.retain(|&(_, c)| c != 0.0);
        by_degree
    }

    /// `xi_perp(l1, l2) = xi(m(l1/(D-1), l2))`; rejects D = 1.
    pub fn xi_perp(&self, lambda1: f64, lambda2: f64) -> Result<f64> {
        let d = self.dimension;
        if d < 2 {
            return Err(Error::ScalarModelRejected);
        }
        let m = PermMatrix::new(d, lambda1 / (d as f64 - 1.0), lambda2).to_dense();
        self.eval_xi(&m)
    }

    /// Gradient of `xi_perp` in `(lambda1, lambda2)`.
    pub fn grad_xi_perp(&self, lambda1: f64, lambda2: f64) -> Result<[f64; 2]> {
        let d = self.dimension;
        if d < 2 {
            return Err(Error::ScalarModelRejected);
        }
        let df = d as f64;
        let m = PermMatrix::new(d, lambda1 / (df - 1.0), lambda2).to_dense();
        let grad = self.grad_xi(&m)?;
        // d m / d lambda1 = (id - 1/D) / (D-1), d m / d lambda2 = 1/D.
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let p1 = if i == j { 1.0 - 1.0 / df } else { -1.0 / df };
                let p2 = 1.0 / df;
                g1 += grad[(i, j)] * p1 / (df - 1.0);
                g2 += grad[(i, j)] * p2;
            }
        }
        Ok([g1, g2])
    }

    /// `cap_xi(x) = (1/D) sum_d xi_dagger(x_d)`; diagonal specs only.
    pub fn cap_xi(&self, x: &[f64]) -> Result<f64> {
        if !self.diagonal_only {
            return Err(Error::NotDiagonal);
        }
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        let d = self.dimension as f64;
        Ok(x.iter().map(|&xd| self.xi_dagger(xd)).sum::<f64>() / d)
    }

    /// The diagonal spec whose value is `cap_xi`; shares `xi_dagger` with
    /// `self`. Used by the nonconvex upper bound.
    pub fn cap_xi_spec(&self) -> Result<CovarianceSpec> {
        if !self.diagonal_only {
            return Err(Error::NotDiagonal);
        }
        let d = self.dimension;
        let mut monomials = Vec::new();
        for (degree, coeff) in self.xi_dagger_coeffs() {
            for species in 0..d {
                monomials.push(Monomial {
                    entries: vec![(species, species); degree],
                    coeff: coeff / d as f64,
                });
            }
        }
        CovarianceSpec::new(d, monomials, self.formal)
    }

    /// Exact gradient of `xi` by monomial differentiation.
    pub fn grad_xi(&self, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dims(r)?;
        let d = self.dimension;
        let mut grad = DMatrix::<f64>::zeros(d, d);
        for m in &self.monomials {
            // Product rule over the multiset: group equal entries first.
            let mut k = 0;
            while k < m.entries.len() {
                let entry = m.entries[k];
                let mut mult = 0usize;
                while k < m.entries.len() && m.entries[k] == entry {
                    mult += 1;
                    k += 1;
                }
                let mut term = m.coeff * mult as f64;
                let mut seen = 0usize;
                for &(a, b) in &m.entries {
                    if (a, b) == entry {
                        seen += 1;
                        if seen <= mult - 1 {
                            term *= r[(a, b)];
                        }
                    } else {
                        term *= r[(a, b)];
                    }
                }
                grad[(entry.0, entry.1)] += term;
            }
        }
        Ok(grad)
    }

    /// `theta(a) = a . grad xi(a) - xi(a)` (Frobenius pairing).
    pub fn theta(&self, a: &DMatrix<f64>) -> Result<f64> {
        let grad = self.grad_xi(a)?;
        let mut dot = 0.0;
        for i in 0..self.dimension {
            for j in 0..self.dimension {
                dot += a[(i, j)] * grad[(i, j)];
            }
        }
        Ok(dot - self.eval_xi(a)?)
    }

    /// Averages `xi` over all simultaneous index relabelings.
    pub fn symmetrize(&self) -> CovarianceSpec {
        let d = self.dimension;
        let perms = permutations(d);
        let scale = 1.0 / perms.len() as f64;
        let mut monomials = Vec::with_capacity(self.monomials.len() * perms.len());
        for perm in &perms {
            for m in &self.monomials {
                monomials.push(Monomial {
                    entries: m
                        .entries
                        .iter()
                        .map(|&(a, b)| (perm[a], perm[b]))
                        .collect(),
                    coeff: m.coeff * scale,
                });
            }
        }
        CovarianceSpec::new(d, monomials, self.formal)
            .expect("symmetrization preserves validity")
    }

    /// Whether the monomial list is closed under simultaneous relabeling
    /// with equal coefficients.
    pub fn check_permutation_invariance(&self) -> InvarianceReport {
        let sym = self.symmetrize();
        let mut max_dev: f64 = 0.0;
        let mut i = 0;
        let mut j = 0;
        while i < self.monomials.len() || j < sym.monomials.len() {
            let (a, b) = (self.monomials.get(i), sym.monomials.get(j));
            match (a, b) {
                (Some(a), Some(b)) if a.entries == b.entries => {
                    max_dev = max_dev.max((a.coeff - b.coeff).abs());
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) => {
                    if a.entries < b.entries {
                        max_dev = max_dev.max(a.coeff.abs());
                        i += 1;
                    } else {
                        max_dev = max_dev.max(b.coeff.abs());
                        j += 1;
                    }
                }
                (Some(a), None) => {
                    max_dev = max_dev.max(a.coeff.abs());
                    i += 1;
                }
                (None, Some(b)) => {
                    max_dev = max_dev.max(b.coeff.abs());
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        InvarianceReport {
            invariant: max_dev <= 1e-12,
            max_deviation: max_dev,
        }
    }

    /// Sampled midpoint-convexity test on the cone.
    ///
    /// Diagonal specs are probed on the nonnegative orthant, others on
    /// random PSD matrices. Reports the worst violation and a witness; this
    /// is a diagnostic, not a proof.
    pub fn check_convexity_on_cone(&self, samples: usize, rng_seed: u64) -> ConvexityReport {
        let mut rng = derive_rng(rng_seed, &[tags::MODEL_CHECKS, 11]);
        let d = self.dimension;
        let mut worst: f64 = 0.0;
        let mut witness = None;
        for _ in 0..samples {
            let (a, b) = if self.diagonal_only {
                let a: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.5)).collect();
                let b: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.5)).collect();
                (DMatrix::from_diagonal(&nalgebra::DVector::from_vec(a)),
                 DMatrix::from_diagonal(&nalgebra::DVector::from_vec(b)))
            } else {
                (random_psd(d, &mut rng), random_psd(d, &mut rng))
            };
            let mid = (&a + &b) * 0.5;
            let lhs = self.eval_xi(&mid).expect("dims fixed");
            let rhs = 0.5 * (self.eval_xi(&a).unwrap() + self.eval_xi(&b).unwrap());
            let defect = lhs - rhs;
            if defect > worst {
                worst = defect;
                witness = Some((a.clone(), b.clone()));
            }
        }
        ConvexityReport {
            midpoint_convex: worst <= 1e-10,
            worst_violation: worst,
            witness,
        }
    }

    /// Samples `xi(x) <= cap_xi(x)` on the unit cube of the nonnegative
    /// orthant; requires a non-formal diagonal spec.
    pub fn check_xi_upper_inequality(&self, samples: usize, rng_seed: u64) -> Result<MarginReport> {
        if !self.diagonal_only {
            return Err(Error::NotDiagonal);
        }
        if self.formal {
            return Err(Error::FormalSpecRejected);
        }
        let mut rng = derive_rng(rng_seed, &[tags::MODEL_CHECKS, 12]);
        let d = self.dimension;
        let mut min_margin = f64::INFINITY;
        let mut max_margin = f64::NEG_INFINITY;
        let mut violations = 0usize;
        for _ in 0..samples {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let margin = self.cap_xi(&x)? - self.eval_xi_diag(&x)?;
            min_margin = min_margin.min(margin);
            max_margin = max_margin.max(margin);
            if margin < -1e-12 {
                violations += 1;
            }
        }
        Ok(MarginReport {
            passed: violations == 0,
            violations,
            min_margin,
            max_margin,
        })
    }
}

/// Verifies the symmetrized-monomial bound
/// `(1/D!) sum_s prod_d x_{s(d)}^{i_d} <= (1/D) sum_d x_d^I`.
///
/// Signed inputs are only admitted for even total degree; odd-degree signed
/// inputs are rejected rather than tested.
pub fn check_monomial_inequality(exponents: &[usize], x: &[f64], allow_signed: bool) -> Result<bool> {
    if exponents.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: exponents.len(),
            got: x.len(),
        });
    }
    let total: usize = exponents.iter().sum();
    let has_negative = x.iter().any(|&v| v < 0.0);
    if has_negative {
        if !allow_signed {
            return Err(Error::InvalidConfig(
                "negative input without allow_signed".into(),
            ));
        }
        if total % 2 != 0 {
            return Err(Error::OddDegreeSignedInput { degree: total });
        }
    }
    let d = x.len();
    let perms = permutations(d);
    let mut lhs = 0.0;
    for perm in &perms {
        let mut term = 1.0;
        for (slot, &i_d) in exponents.iter().enumerate() {
            term *= x[perm[slot]].powi(i_d as i32);
        }
        lhs += term;
    }
    lhs /= perms.len() as f64;
    let rhs = x.iter().map(|&v| v.powi(total as i32)).sum::<f64>() / d as f64;
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    Ok(lhs <= rhs + 1e-12 * scale)
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub invariant: bool,
    pub max_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub midpoint_convex: bool,
    pub worst_violation: f64,
    pub witness: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    pub passed: bool,
    pub violations: usize,
    pub min_margin: f64,
    pub max_margin: f64,
}

pub(crate) fn permutations(d: usize) -> Vec<Vec<usize>> {
    assert!(d <= 8, "permutation enumeration capped at D = 8");
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..d).collect();
    heap_permutations(&mut current, d, &mut out);
    out.sort_unstable();
    out
}

fn heap_permutations(arr: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(arr.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(arr, k - 1, out);
        if k % 2 == 0 {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

pub(crate) fn random_psd(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let psd = &g * g.transpose();
    psd / d as f64
}

/// A finitely supported reference measure on the unit ball of R^D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinMeasure {
    dimension: usize,
    atoms: Vec<(Vec<f64>, f64)>,
}

impl SpinMeasure {
    pub fn new(dimension: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<SpinMeasure> {
        if atoms.is_empty() {
            return Err(Error::InvalidModel("measure needs at least one atom".into()));
        }
        let mut total = 0.0;
        for (point, weight) in &atoms {
            if point.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: point.len(),
                });
            }
            if !(*weight > 0.0) {
                return Err(Error::InvalidModel("atom weights must be positive".into()));
            }
            let norm_sq: f64 = point.iter().map(|v| v * v).sum();
            if norm_sq > 1.0 + 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "atom outside the closed unit ball (|x| = {:.6})",
                    norm_sq.sqrt()
                )));
            }
            total += weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "atom weights sum to {total:.15}, expected 1"
            )));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(SpinMeasure { dimension, atoms })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    /// Whether the atom set is closed under coordinate permutation with
    /// matching weights.
    pub fn is_permutation_invariant(&self, tol: f64) -> bool {
        for perm in permutations(self.dimension) {
            for (point, weight) in &self.atoms {
                let permuted: Vec<f64> = (0..self.dimension).map(|i| point[perm[i]]).collect();
                let found = self.atoms.iter().any(|(q, w)| {
                    q.iter()
                        .zip(&permuted)
                        .all(|(a, b)| (a - b).abs() <= tol)
                        && (w - weight).abs() <= tol
                });
                if !found {
                    return false;
                }
            }
        }
        true
    }

    /// Factors the measure into independent per-coordinate marginals when it
    /// is exactly a product measure; returns one (support, weights) pair per
    /// coordinate.
    pub fn as_product(&self) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
        let d = self.dimension;
        let mut marginals: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(d);
        for dim in 0..d {
            let mut support: Vec<f64> = Vec::new();
            let mut weights: Vec<f64> = Vec::new();
            for (point, weight) in &self.atoms {
                let v = point[dim];
                match support.iter().position(|&s| (s - v).abs() <= 1e-13) {
                    Some(k) => weights[k] += weight,
                    None => {
                        support.push(v);
                        weights.push(*weight);
                    }
                }
            }
            marginals.push((support, weights));
        }
        let expected: usize = marginals.iter().map(|(s, _)| s.len()).product();
        if expected != self.atoms.len() {
            return None;
        }
        // Every grid point must carry exactly the product of its marginal
        // weights.
        for (point, weight) in &self.atoms {
            let mut w = 1.0;
            for dim in 0..d {
                let (support, weights) = &marginals[dim];
                let k = support
                    .iter()
                    .position(|&s| (s - point[dim]).abs() <= 1e-13)?;
                w *= weights[k];
            }
            if (w - weight).abs() > 1e-12 {
                return None;
            }
        }
        Some(marginals)
    }

    /// The marginal measure of one coordinate as a 1-dimensional
    /// `SpinMeasure`.
    pub fn marginal(&self, dim: usize) -> Result<SpinMeasure> {
        if dim >= self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: dim,
            });
        }
        let mut support: Vec<(f64, f64)> = Vec::new();
        for (point, weight) in &self.atoms {
            let v = point[dim];
            match support.iter_mut().find(|(s, _)| (*s - v).abs() <= 1e-13) {
                Some((_, w)) => *w += weight,
                None => support.push((v, *weight)),
            }
        }
        SpinMeasure::new(1, support.into_iter().map(|(v, w)| (vec![v], w)).collect())
    }
}

/// A covariance spec, a reference measure, and the inverse-temperature-like
/// parameter `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInstance {
    pub covariance: CovarianceSpec,
    pub measure: SpinMeasure,
    pub t: f64,
}

impl ModelInstance {
    pub fn new(covariance: CovarianceSpec, measure: SpinMeasure, t: f64) -> Result<ModelInstance> {
        if covariance.dimension() != measure.dimension() {
            return Err(Error::DimensionMismatch {
                expected: covariance.dimension(),
                got: measure.dimension(),
            });
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidModel("t must be >= 0".into()));
        }
        Ok(ModelInstance {
            covariance,
            measure,
            t,
        })
    }

    pub fn dimension(&self) -> usize {
        self.covariance.dimension()
    }

    pub fn with_t(&self, t: f64) -> Result<ModelInstance> {
        ModelInstance::new(self.covariance.clone(), self.measure.clone(), t)
    }
}

/// Shipped presets.
pub mod presets {
    use super::*;

    /// Potts-type interaction: `xi(R) = sum_{d,d'} R_{dd'}^2`, uniform
    /// measure on the canonical basis vectors.
    pub fn potts(d: usize) -> ModelInstance {
        let mut monomials = Vec::new();
        for a in 0..d {
            for b in 0..d {
                monomials.push(Monomial {
                    entries: vec![(a, b), (a, b)],
                    coeff: 1.0,
                });
            }
        }
        let spec = CovarianceSpec::new(d, monomials, false).unwrap();
        let w = 1.0 / d as f64;
        let atoms = (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                (e, w)
            })
            .collect();
        let measure = SpinMeasure::new(d, atoms).unwrap();
        ModelInstance::new(spec, measure, 0.0).unwrap()
    }

    /// `xi(x) = x^2` with D = 1 and uniform signs.
    pub fn sk() -> ModelInstance {
        ising_diag(1, &[(2, 1.0)])
    }

    /// Two-species model `xi(x1, x2) = (a/2) x1^2 + (a/2) x2^2 + x1 x2`,
    /// uniform signs on both coordinates. Convex on the PSD cone iff
    /// `alpha >= 1`.
    pub fn bp_sk(alpha: f64) -> ModelInstance {
        let monomials = vec![
            Monomial {
                entries: vec![(0, 0), (0, 0)],
                coeff: alpha / 2.0,
            },
            Monomial {
                entries: vec![(1, 1), (1, 1)],
                coeff: alpha / 2.0,
            },
            Monomial {
                entries: vec![(0, 0), (1, 1)],
                coeff: 1.0,
            },
        ];
        let spec = CovarianceSpec::new(2, monomials, false).unwrap();
        ModelInstance::new(spec, uniform_signs(2), 0.0).unwrap()
    }

    /// Diagonal model `xi(x) = sum_k c_k (1/D) sum_d x_d^{p_k}` with uniform
    /// signs; `coeffs` lists `(degree, coefficient)` pairs.
    pub fn ising_diag(d: usize, coeffs: &[(usize, f64)]) -> ModelInstance {
        let mut monomials = Vec::new();
        for &(degree, coeff) in coeffs {
            assert!(degree >= 1, "monomial degree must be >= 1");
            for species in 0..d {
                monomials.push(Monomial {
                    entries: vec![(species, species); degree],
                    coeff: coeff / d as f64,
                });
            }
        }
        let spec = CovarianceSpec::new(d, monomials, false).unwrap();
        ModelInstance::new(spec, uniform_signs(d), 0.0).unwrap()
    }

    /// The formal two-species cubic `xi(x1, x2) = x1 x2 (x1 + x2)`, the
    /// standard witness that the diagonal upper inequality needs
    /// nonnegative inputs. Not sampleable.
    pub fn formal_cubic() -> ModelInstance {
        let monomials = vec![
            Monomial {
                entries: vec![(0, 0), (0, 0), (1, 1)],
                coeff: 1.0,
            },
            Monomial {
                entries: vec![(0, 0), (1, 1), (1, 1)],
                coeff: 1.0,
            },
        ];
        let spec = CovarianceSpec::new(2, monomials, true).unwrap();
        ModelInstance::new(spec, uniform_signs(2), 0.0).unwrap()
    }

    /// Uniform measure on `{-1, 1}^D / sqrt(D)`. The 1/sqrt(D) scale keeps
    /// sign configurations inside the closed Euclidean unit ball, which the
    /// measure type enforces; for D = 1 the atoms are exactly ±1.
    fn uniform_signs(d: usize) -> SpinMeasure {
        let n = 1usize << d;
        let w = 1.0 / n as f64;
        let scale = 1.0 / (d as f64).sqrt();
        let atoms = (0..n)
            .map(|mask| {
                let point: Vec<f64> = (0..d)
                    .map(|bit| if mask >> bit & 1 == 1 { scale } else { -scale })
                    .collect();
                (point, w)
            })
            .collect();
        SpinMeasure::new(d, atoms).unwrap()
    }
}
