use cspmp::engine::{run, RunConfig};
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::Predicate;
use std::time::Instant;

fn main() {
    let pred = Predicate::maxcut2().unwrap();
    let delta = 0.1;
    let xi = pred.mixture();
    let mu0 = StepFunction::zero();
    let gcfg = GridConfig::for_mixture(&xi, delta);
    let t0 = Instant::now();
    let grid = solve_pde(&xi, &mu0, &gcfg).unwrap();
    println!("pde solve: {:?}", t0.elapsed());
    let value = functional_value(&grid, &xi, &mu0);
    let sol = ParisiSolution { mu: mu0, grid, functional_value: value, xi, eta: 0.05, warning: false };
    let t0 = Instant::now();
    let stats = simulate_sde(&sol, delta, 100_000, 11).unwrap();
    println!("sde: {:?}", t0.elapsed());
    let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();
    let t0 = Instant::now();
    let inst = sample_index_regular(1 << 15, 256, 2, 5).unwrap();
    println!("instance gen: {:?}", t0.elapsed());
    let rc = RunConfig::new(delta, 8);
    let t0 = Instant::now();
    let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
    println!("engine run: {:?}", t0.elapsed());
    for (idx, z2) in res.stats.mean_z2_dir.iter().enumerate() {
        let nu = (0.1f64) / 4.0;
        let var = res.stats.var_u_dir[idx];
        println!(
            "level {:2}: z2 ratio {:.4}  var_u ratio {:.4}  m4/3nu^2 {:.4}",
            idx + 1,
            z2 / ((idx as f64 + 2.0) * delta),
            var / nu,
            res.stats.m4_u_dir[idx] / (3.0 * nu * nu)
        );
    }
    println!("fraction = {:.4}", res.satisfying_fraction);
    println!("prox_u = {:?}", &res.stats.prox_u[..5]);
}
