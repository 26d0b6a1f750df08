use cspmp::engine::{run, RunConfig};
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::{MixturePolynomial, Predicate};

fn main() {
    // derivative bounds probe
    let xi = MixturePolynomial::new(vec![0.0, 0.25]).unwrap();
    let cfg = GridConfig::for_mixture(&xi, 0.1);
    let mu = StepFunction::new(vec![0.0, 0.3, 0.6], vec![0.5, 1.5, 2.5]).unwrap();
    let grid = solve_pde(&xi, &mu, &cfg).unwrap();
    let slack = 5.0 * grid.dx;
    let mut worst_px: (f64, usize, usize) = (0.0, 0, 0);
    let mut worst_pxx: (f64, usize, usize) = (0.0, 0, 0);
    for j in 0..grid.nt {
        for i in 0..grid.nx {
            let px = grid.phi_x[grid.idx(j, i)].abs() - 1.0;
            if px > worst_px.0 { worst_px = (px, j, i); }
            let pxx = -grid.phi_xx[grid.idx(j, i)];
            if pxx > worst_pxx.0 { worst_pxx = (pxx, j, i); }
        }
    }
    println!("slack={slack:.4} worst |phi_x|-1 = {:.3e} at j={} i={} (x={:+.3})", worst_px.0, worst_px.1, worst_px.2, grid.x_of(worst_px.2));
    println!("worst -phi_xx = {:.3e} at j={} i={} (x={:+.3})", worst_pxx.0, worst_pxx.1, worst_pxx.2, grid.x_of(worst_pxx.2));

    // engine z^2 drift probe
    let pred = Predicate::maxcut2().unwrap();
    let delta = 0.1;
    let xi = pred.mixture();
    let mu0 = StepFunction::zero();
    let gcfg = GridConfig::for_mixture(&xi, delta);
    let grid = solve_pde(&xi, &mu0, &gcfg).unwrap();
    let value = functional_value(&grid, &xi, &mu0);
    let sol = ParisiSolution { mu: mu0, grid, functional_value: value, xi, eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, delta, 20_000, 11).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();
    println!("consts = {consts:?}");
    let inst = sample_index_regular(2_000, 64, 2, 5).unwrap();
    let rc = RunConfig::new(delta, 8);
    let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
    for (idx, z2) in res.stats.mean_z2_dir.iter().enumerate() {
        println!("level {}: z2 = {:.4} expect {:.4} ratio {:.3}", idx + 1, z2, (idx as f64 + 2.0) * delta, z2 / ((idx as f64 + 2.0) * delta));
    }
    println!("mean_u {:?}", &res.stats.mean_u_dir);
    println!("var_u {:?}", &res.stats.var_u_dir);
}
