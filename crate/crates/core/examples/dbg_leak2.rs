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
    for (n, d) in [(1usize << 15, 64usize), (1 << 15, 256), (1 << 14, 1024)] {
        let inst = sample_index_regular(n, d, 2, 77).unwrap();
        let rc = RunConfig::new(delta, 55);
        let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
        let v10 = res.stats.var_u_dir[10] / cspmp::analysis::nu(&xi, delta, 11, 2).unwrap();
        let v25 = res.stats.var_u_dir[25] / cspmp::analysis::nu(&xi, delta, 26, 2).unwrap();
        let v39 = res.stats.var_u_dir[39] / cspmp::analysis::nu(&xi, delta, 40, 2).unwrap();
        let frac = res.satisfying_fraction;
        let eff = (frac - 0.5) / (fv / ((d / 2) as f64).sqrt());
        println!("n={n} d={d}: var_u/nu at l=11/26/40: {v10:.3}/{v25:.3}/{v39:.3}  frac={frac:.5} eff={eff:.3}");
    }
}
