use cspmp::engine::{run, RunConfig};
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::Predicate;

fn main() {
    let pred = Predicate::maxcut2().unwrap();
    let xi = pred.mixture();
    let delta = 0.025f64;
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, delta);
    let out = minimize_alg(&xi, 3, &mc).unwrap();
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    let fv = functional_value(&grid, &xi, &out.mu);
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: fv, xi: xi.clone(), eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, delta, 100_000, 4).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();
    let inst = sample_index_regular(1 << 15, 256, 2, 77).unwrap();
    let rc = RunConfig::new(delta, 55);
    let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
    let levels = (1.0 / delta) as usize;
    println!("level | E[A^2]*nu/delta | 2E[zAu]/delta | E[Au^2]/delta | var_u/nu");
    for l in 0..levels {
        let nu = cspmp::analysis::nu(&xi, delta, l + 1, 2).unwrap();
        println!(
            "{:5} | {:.4} | {:+.4} | {:.4} | {:.4}",
            l,
            res.stats.mean_a2_node[l] * nu / delta,
            2.0 * res.stats.mean_zau_node[l] / delta,
            res.stats.mean_a_u2_node[l] * consts[l] / consts[l] / delta,
            res.stats.var_u_dir[l] / nu
        );
    }
}
