use cspmp::engine::{run, RunConfig};
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::Predicate;
use cspmp::rng::derive_seed;

fn main() {
    let pred = Predicate::xor4even().unwrap();
    let xi = pred.mixture();
    let delta = 0.05f64;
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, delta);
    let out = minimize_alg(&xi, 3, &mc).unwrap();
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    let fv = functional_value(&grid, &xi, &out.mu);
    println!("xor ALG k=3: {:.6}", fv);
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: fv, xi: xi.clone(), eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, delta, 100_000, 4).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, 4).unwrap();
    let alpha = 64.0f64;
    for selfn in [false] {
        let mut fr = Vec::new();
        for s in 0..3u64 {
            let inst = sample_index_regular(1 << 15, 256, 4, derive_seed(100, s)).unwrap();
            let mut rc = RunConfig::new(delta, derive_seed(200, s));
            rc.self_normalize = selfn;
            let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
            fr.push(res.satisfying_fraction);
        }
        fr.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = fr[1];
        println!(
            "self={selfn}: fracs {:?} median {:.5} threshold {:.5} eff {:.3}",
            fr, med, 0.5 + 0.8 * fv / alpha.sqrt(), (med - 0.5) / (fv / alpha.sqrt())
        );
    }
}
