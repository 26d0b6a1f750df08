use cspmp::parisi::{solve_pde, abs_gaussian_mean, GridConfig, StepFunction};
use cspmp::predicate::MixturePolynomial;

fn main() {
    let xi = MixturePolynomial::new(vec![0.0, 0.25]).unwrap();
    let cfg = GridConfig::for_mixture(&xi, 0.1);
    let grid = solve_pde(&xi, &StepFunction::zero(), &cfg).unwrap();
    let s2 = xi.xi_prime(1.0);
    for i in (3000..grid.nx).step_by(100) {
        let x = grid.x_of(i);
        let gap = grid.phi[grid.idx(0, i)] - x.abs();
        let truth = abs_gaussian_mean(x, s2) - x.abs();
        println!("i={i} x={x:+.3} gap={gap:+.3e} truth={truth:+.3e} err={:+.3e}", gap - truth);
    }
}
