// Prop 5.4 normalization drift: max_l |(xi'((l+1)d)-xi'(ld))/d * E[Phi_xx^2] - 1|
use cspmp::parisi::*;
use cspmp::predicate::MixturePolynomial;

fn main() {
    let k: usize = std::env::args().nth(1).map(|v| v.parse().unwrap()).unwrap_or(8);
    let xi = MixturePolynomial::new(vec![0.0, 0.5]).unwrap();
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, 0.025);
    mc.sweeps = 6;
    let out = minimize_alg(&xi, k, &mc).unwrap();
    println!("k={k} alg={:.6} mu={:?}", out.value, out.mu.values());
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    let fv = functional_value(&grid, &xi, &out.mu);
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: fv, xi: xi.clone(), eta: 0.05, warning: false };
    let mut prev = f64::NAN;
    for delta in [0.1f64, 0.05, 0.025] {
        let stats = simulate_sde(&sol, delta, 100_000, 17).unwrap();
        let levels = stats.mean_phixx_sq.len();
        let mut worst = 0.0f64;
        let mut worst_l = 0;
        for l in 0..levels {
            let t1 = (l + 1) as f64 * delta;
            if t1 > 1.0 - 0.05 + 1e-9 { break; }
            let t0 = l as f64 * delta;
            let dev = ((xi.xi_prime(t1) - xi.xi_prime(t0)) / delta * stats.mean_phixx_sq[l] - 1.0).abs();
            if dev > worst { worst = dev; worst_l = l; }
        }
        println!("delta={delta}: max dev = {worst:.4} at l={worst_l}  ratio vs prev = {:.3}", prev / worst);
        prev = worst;
    }
}
