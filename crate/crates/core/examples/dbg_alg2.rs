use cspmp::parisi::*;
use cspmp::predicate::MixturePolynomial;

fn main() {
    let xiq = MixturePolynomial::new(vec![0.0, 0.0, 0.0, 0.25]).unwrap();
    for mu_max in [8.0, 16.0, 24.0] {
        let mut cfg = MinimizeConfig::for_mixture(&xiq);
        cfg.mu_max = mu_max;
        let out = minimize_alg(&xiq, 3, &cfg).unwrap();
        println!("s^4/4 k=3 mu_max={mu_max}: value={:.6} mu={:?}", out.value, out.mu.values());
    }
    let xi2 = MixturePolynomial::new(vec![0.0, 0.5]).unwrap();
    let mut cfg = MinimizeConfig::for_mixture(&xi2);
    cfg.mu_max = 16.0;
    let out = minimize_alg(&xi2, 3, &cfg).unwrap();
    println!("s^2/2 k=3 mu_max=16: value={:.6} mu={:?}", out.value, out.mu.values());
}
