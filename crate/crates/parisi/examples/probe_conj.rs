// scratch probe: GH convergence for E log cosh and the psi closed form
fn gh(n: usize, a: f64) -> f64 {
    // recreate via library quadrature through psi? use simple recursion here
    // instead: physicists hermite via Golub-Welsch replicated with nalgebra
    use nalgebra::DMatrix;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut total_w = 0.0;
    let mut acc = 0.0;
    for i in 0..n {
        let w = eig.eigenvectors[(0, i)].powi(2);
        let x = eig.eigenvalues[i] * std::f64::consts::SQRT_2;
        total_w += w;
        acc += w * (a * x).cosh().ln();
    }
    acc / total_w
}

fn simpson(a: f64) -> f64 {
    // E log cosh(a Z) over [-12, 12] with the normal density.
    let n = 200_001usize;
    let (lo, hi) = (-12.0f64, 12.0);
    let h = (hi - lo) / (n - 1) as f64;
    let f = |z: f64| (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() * (a * z).cosh().ln();
    let mut acc = f(lo) + f(hi);
    for i in 1..n - 1 {
        let z = lo + i as f64 * h;
        acc += f(z) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn main() {
    for p in [0.1f64, 0.5, 1.0] {
        let a = (2.0 * p).sqrt();
        let exact = simpson(a);
        for n in [16usize, 32, 64, 128] {
            let v = gh(n, a);
            println!("p={p} n={n}: gh={v:.15} err={:.3e}", (v - exact).abs());
        }
        println!("   simpson exact = {exact:.15}");
    }
}
