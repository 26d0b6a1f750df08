use cspmp::parisi::*;
use cspmp::predicate::MixturePolynomial;

fn main() {
    let k: usize = std::env::args().nth(1).map(|v| v.parse().unwrap()).unwrap_or(16);
    let xi = MixturePolynomial::new(vec![0.0, 0.5]).unwrap();
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, 0.025);
    mc.sweeps = 6;
    let out = minimize_alg(&xi, k, &mc).unwrap();
    println!("k={k} alg={:.6} evals={}", out.value, out.evaluations);
    println!("mu={:?}", out.mu.values().iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: 0.0, xi: xi.clone(), eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, 0.025, 100_000, 17).unwrap();
    print!("devs at delta=0.025: ");
    for l in 0..stats.mean_phixx_sq.len() {
        let t1 = (l + 1) as f64 * 0.025;
        if t1 > 0.95 + 1e-9 { break; }
        let t0 = l as f64 * 0.025;
        let dev = (xi.xi_prime(t1) - xi.xi_prime(t0)) / 0.025 * stats.mean_phixx_sq[l] - 1.0;
        print!("{:.3} ", dev);
    }
    println!();
}
