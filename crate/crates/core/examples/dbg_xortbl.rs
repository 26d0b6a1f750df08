use cspmp::parisi::*;
use cspmp::predicate::Predicate;

fn main() {
    let pred = Predicate::xor4even().unwrap();
    let xi = pred.mixture();
    let delta = 0.05f64;
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, delta);
    let out = minimize_alg(&xi, 3, &mc).unwrap();
    println!("mu = {:?} bp {:?}", out.mu.values(), out.mu.breakpoints());
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    for tl in [0usize, 1, 2, 5, 10, 14, 17, 19] {
        let t = tl as f64 * delta;
        let j = ((t / grid.dt).round() as usize).min(grid.nt - 1);
        let row = &grid.phi_xx[j * grid.nx..(j + 1) * grid.nx];
        let rowx = &grid.phi_x[j * grid.nx..(j + 1) * grid.nx];
        let mx = row.iter().cloned().fold(f64::MIN, f64::max);
        let c = grid.center();
        println!(
            "t={t:.2}: max phi_xx={mx:9.3} phi_xx(0)={:9.3} phi_x at x=0.1,0.3,1.0: {:+.4} {:+.4} {:+.4}",
            row[c],
            rowx[c + (0.1 / grid.dx) as usize],
            rowx[c + (0.3 / grid.dx) as usize],
            rowx[c + (1.0 / grid.dx) as usize]
        );
    }
    let stats = simulate_sde(&ParisiSolution { mu: out.mu.clone(), grid: grid.clone(), functional_value: 0.0, xi: xi.clone(), eta: 0.05, warning: false }, delta, 50_000, 4).unwrap();
    println!("sde mean_phixx_sq: {:?}", &stats.mean_phixx_sq[..10]);
    println!("sde var_x: {:?}", &stats.var_x[..10]);
    let consts = nonlinearity_constants(&ParisiSolution { mu: out.mu, grid, functional_value: 0.0, xi: xi.clone(), eta: 0.05, warning: false }, &stats, delta, 4).unwrap();
    println!("consts: {:?}", consts);
}
