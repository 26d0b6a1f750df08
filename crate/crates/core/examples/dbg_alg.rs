use cspmp::parisi::*;
use cspmp::predicate::MixturePolynomial;
use std::time::Instant;

fn main() {
    // SK mixture: xi = s^2/2
    let xi2 = MixturePolynomial::new(vec![0.0, 0.5]).unwrap();
    let cfg = MinimizeConfig::for_mixture(&xi2);
    for k in [0usize, 1, 2, 3] {
        let t0 = Instant::now();
        let out = minimize_alg(&xi2, k, &cfg).unwrap();
        println!(
            "s^2/2 k={k}: value={:.6} warn={} evals={} mu={:?} [{:?}]",
            out.value, out.warning, out.evaluations, out.mu.values(), t0.elapsed()
        );
    }
    let xi4 = MixturePolynomial::new(vec![0.0, 0.25]).unwrap();
    let cfg4 = MinimizeConfig::for_mixture(&xi4);
    let t0 = Instant::now();
    let out4 = minimize_alg(&xi4, 3, &cfg4).unwrap();
    let out2 = minimize_alg(&xi2, 3, &cfg).unwrap();
    println!("s^2/4 k=3: value={:.6} [{:?}]", out4.value, t0.elapsed());
    println!("scaling check: {:.6} vs {:.6} (diff {:.2e})",
        out4.value, out2.value / 2f64.sqrt(), (out4.value - out2.value / 2f64.sqrt()).abs());
    // quartic for xor4even
    let xiq = MixturePolynomial::new(vec![0.0, 0.0, 0.0, 0.25]).unwrap();
    let cfgq = MinimizeConfig::for_mixture(&xiq);
    let t0 = Instant::now();
    let outq = minimize_alg(&xiq, 3, &cfgq).unwrap();
    println!("s^4/4 k=3: value={:.6} mu={:?} [{:?}]", outq.value, outq.mu.values(), t0.elapsed());
}
