//! Derivative-free simplex minimization (Nelder-Mead with the adaptive
//! coefficients of Gao and Han) plus the strictly-positive path
//! parametrizations used by the multistart driver.
//!
//! The simplex method is used instead of gradient-based line search because
//! Monte-Carlo-mode objectives are noisy; quadrature noise would be
//! amplified by finite differences.

/// Options for one simplex run.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOpts {
    pub max_iters: usize,
    /// Simplex diameter tolerance in parameter space.
    pub x_tol: f64,
    /// Best-to-worst value spread tolerance.
    pub f_tol: f64,
    /// Initial simplex edge length.
    pub scale: f64,
}

impl Default for SimplexOpts {
    fn default() -> Self {
        SimplexOpts {
            max_iters: 4000,
            x_tol: 1e-9,
            f_tol: 1e-12,
            scale: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub iters: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`.
pub fn nelder_mead(f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], opts: &SimplexOpts) -> SimplexOutcome {
    let n = x0.len();
    assert!(n >= 1, "simplex needs at least one dimension");
    let nf = n as f64;
    // Adaptive coefficients.
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / nf;
    let gamma = 0.75 - 1.0 / (2.0 * nf);
    let delta = 1.0 - 1.0 / nf;

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.scale;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

    let mut iters = 0usize;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let diameter = simplex
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        let spread = values[worst] - values[best];
        if diameter < opts.x_tol && spread.abs() < opts.f_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0f64; n];
        for (k, vertex) in simplex.iter().enumerate() {
            if k == worst {
                continue;
            }
            for (c, v) in centroid.iter_mut().zip(vertex) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= nf;
        }

        let blend = |a: &[f64], b: &[f64], w: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + w * (x - y)).collect()
        };

        let reflected = blend(&centroid, &simplex[worst], alpha);
        let f_reflected = eval(&reflected, &mut evals);
        if f_reflected < values[best] {
            let expanded = blend(&centroid, &simplex[worst], beta);
            let f_expanded = eval(&expanded, &mut evals);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = if f_reflected < values[worst] {
                blend(&centroid, &simplex[worst], gamma)
            } else {
                blend(&centroid, &simplex[worst], -gamma)
            };
            let f_contracted = eval(&contracted, &mut evals);
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // Shrink toward the best vertex.
                let best_vertex = simplex[best].clone();
                for (k, vertex) in simplex.iter_mut().enumerate() {
                    if k == best {
                        continue;
                    }
                    for (v, b) in vertex.iter_mut().zip(&best_vertex) {
                        *v = b + delta * (*v - b);
                    }
                    values[k] = eval(vertex, &mut evals);
                }
            }
        }
    }

    let mut best_idx = 0;
    for k in 1..=n {
        if values[k] < values[best_idx] {
            best_idx = k;
        }
    }
    SimplexOutcome {
        x: simplex[best_idx].clone(),
        value: values[best_idx],
        evals,
        iters,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic_bowl() {
        let mut f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2);
        let out = nelder_mead(&mut f, &[0.0, 0.0], &SimplexOpts::default());
        assert!(out.value < 1e-12);
        assert!((out.x[0] - 1.5).abs() < 1e-6);
        assert!((out.x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn handles_rosenbrock() {
        let mut f = |x: &[f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + 100.0 * b * b
        };
        let out = nelder_mead(
            &mut f,
            &[-1.2, 1.0],
            &SimplexOpts {
                max_iters: 20_000,
                ..Default::default()
            },
        );
        assert!(out.value < 1e-8, "value {}", out.value);
    }

    #[test]
    fn infinite_regions_are_avoided() {
        let mut f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.3).powi(2)
            }
        };
        let out = nelder_mead(&mut f, &[2.0], &SimplexOpts::default());
        assert!((out.x[0] - 0.3).abs() < 1e-6);
    }
}
