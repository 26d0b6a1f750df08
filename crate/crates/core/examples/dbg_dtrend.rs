use cspmp::engine::{run, RunConfig};
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::Predicate;

fn main() {
    let pred = Predicate::maxcut2().unwrap();
    let xi = pred.mixture();
    let delta = 0.05f64;
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, delta);
    let out = minimize_alg(&xi, 3, &mc).unwrap();
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    let fv = functional_value(&grid, &xi, &out.mu);
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: fv, xi: xi.clone(), eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, delta, 100_000, 4).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();
    for (n, d, selfn) in [
        (1usize << 15, 512usize, true),
        (1 << 15, 1024, true),
    ] {
        let inst = sample_index_regular(n, d, 2, 77).unwrap();
        let mut rc = RunConfig::new(delta, 55);
        rc.self_normalize = selfn;
        let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
        let eff = (res.satisfying_fraction - 0.5) / (fv / ((d / 2) as f64).sqrt());
        println!(
            "n={n} d={d} self={selfn}: frac={:.5} pre={:.5} eff={:.3}",
            res.satisfying_fraction, res.mean_f_z, eff
        );
    }
}
