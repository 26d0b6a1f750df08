// quick probe: where does the CH solution deviate from E|x+G|?
use cspmp::parisi::{solve_pde, abs_gaussian_mean, GridConfig, StepFunction};
use cspmp::predicate::MixturePolynomial;

fn main() {
    let xi = MixturePolynomial::new(vec![0.0, 0.25]).unwrap();
    let cfg = GridConfig::for_mixture(&xi, 0.1);
    println!("dt={} dx={} x_max={}", cfg.dt, cfg.dx, cfg.x_max);
    let grid = solve_pde(&xi, &StepFunction::zero(), &cfg).unwrap();
    for j in [0usize, 250, 500, 750, 900, 990, 999] {
        let s2 = xi.xi_prime(1.0) - xi.xi_prime(grid.t_of(j));
        let mut worst = (0.0f64, 0usize);
        for i in 0..grid.nx {
            let err = (grid.phi[grid.idx(j, i)] - abs_gaussian_mean(grid.x_of(i), s2)).abs();
            if err > worst.0 { worst = (err, i); }
        }
        let c = grid.phi[grid.idx(j, grid.nx-1)] - grid.x_max;
        println!("j={j} t={:.3} worst={:.2e} at x={:+.4} (center err {:.2e}, edge c={:.3e})",
            grid.t_of(j), worst.0, grid.x_of(worst.1),
            (grid.phi[grid.idx(j, grid.center())] - abs_gaussian_mean(0.0, s2)).abs(), c);
    }
}
