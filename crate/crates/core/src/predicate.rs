//! CSP predicates `f: {±1}^r -> {0,1}` and their Fourier expansions.
//!
//! Sign patterns and coordinate subsets are bitmasks over `[r]`: bit
//! `iota - 1` of a pattern mask is set when coordinate `iota` carries `-1`,
//! and bit `iota - 1` of a subset mask is set when `iota` is in the subset.
//! The text format (see [`Predicate::from_text`]) orders patterns
//! lexicographically with coordinate 1 most significant and `+1 < -1`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MAX_ARITY: usize = 12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Predicate {
    r: usize,
    truth_table: Vec<u8>,
    fourier: Vec<f64>,
    mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateFlags {
    pub is_even: bool,
    pub has_linear: bool,
}

impl Predicate {
    /// Builds a predicate from its truth table by the fast transform over
    /// the boolean cube, O(r 2^r).
    pub fn fourier_transform(r: usize, table: &[u8]) -> Result<Predicate> {
        if !(2..=MAX_ARITY).contains(&r) {
            return Err(Error::BadArity(r));
        }
        let size = 1usize << r;
        if table.len() != size {
            return Err(Error::BadTruthTable(format!(
                "length {} != 2^{r}",
                table.len()
            )));
        }
        if table.iter().any(|&b| b > 1) {
            return Err(Error::BadTruthTable("entries must be 0 or 1".into()));
        }
        // Walsh-Hadamard butterfly: after pass over bit k, entries hold
        // sums of f(x) * (-1)^{x_k * S_k} over that bit.
        let mut coeff: Vec<f64> = table.iter().map(|&b| b as f64).collect();
        for k in 0..r {
            let bit = 1usize << k;
            for s in 0..size {
                if s & bit == 0 {
                    let lo = coeff[s];
                    let hi = coeff[s | bit];
                    coeff[s] = lo + hi;
                    coeff[s | bit] = lo - hi;
                }
            }
        }
        let norm = 1.0 / size as f64;
        for c in coeff.iter_mut() {
            *c *= norm;
        }
        let mean = coeff[0];
        Ok(Predicate {
            r,
            truth_table: table.to_vec(),
            fourier: coeff,
            mean,
        })
    }

    pub fn arity(&self) -> usize {
        self.r
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn truth_table(&self) -> &[u8] {
        &self.truth_table
    }

    /// Fourier coefficient of the subset encoded by `mask`.
    pub fn fourier(&self, mask: usize) -> f64 {
        self.fourier[mask]
    }

    pub fn fourier_coeffs(&self) -> &[f64] {
        &self.fourier
    }

    /// Truth value at the sign pattern encoded by `mask`.
    pub fn value(&self, mask: usize) -> u8 {
        self.truth_table[mask]
    }

    /// Multilinear extension evaluated at a real point.
    pub fn multilinear(&self, point: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (mask, &c) in self.fourier.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut prod = c;
            let mut m = mask;
            while m != 0 {
                let k = m.trailing_zeros() as usize;
                prod *= point[k];
                m &= m - 1;
            }
            acc += prod;
        }
        acc
    }

    /// Partial derivative of the multilinear extension at `point` with
    /// respect to coordinate `coord` (1-based). The result never depends on
    /// `point[coord-1]`.
    pub fn partial_derivative(&self, coord: usize, point: &[f64]) -> Result<f64> {
        if coord == 0 || coord > self.r {
            return Err(Error::CoordOutOfRange { coord, r: self.r });
        }
        if point.len() != self.r {
            return Err(Error::BadParameter(format!(
                "point length {} != arity {}",
                point.len(),
                self.r
            )));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("derivative point".into()));
        }
        let bit = 1usize << (coord - 1);
        let mut acc = 0.0;
        for (mask, &c) in self.fourier.iter().enumerate() {
            if c == 0.0 || mask & bit == 0 {
                continue;
            }
            let mut prod = c;
            let mut m = mask & !bit;
            while m != 0 {
                let k = m.trailing_zeros() as usize;
                prod *= point[k];
                m &= m - 1;
            }
            acc += prod;
        }
        Ok(acc)
    }

    pub fn flags(&self) -> PredicateFlags {
        let mut is_even = true;
        let mut has_linear = false;
        for (mask, &c) in self.fourier.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let k = mask.count_ones();
            if k % 2 == 1 {
                is_even = false;
            }
            if k == 1 {
                has_linear = true;
            }
        }
        PredicateFlags { is_even, has_linear }
    }

    /// Mixture polynomial xi(s) = sum_j ||f^{=j}||^2 s^j.
    pub fn mixture(&self) -> MixturePolynomial {
        let mut weights = vec![0.0; self.r];
        for (mask, &c) in self.fourier.iter().enumerate() {
            let j = mask.count_ones() as usize;
            if j >= 1 {
                weights[j - 1] += c * c;
            }
        }
        MixturePolynomial { weights }
    }

    /// Parses the text format: first line `r`, second line `2^r` bits in
    /// lexicographic sign-pattern order, coordinate 1 most significant.
    pub fn from_text(text: &str) -> Result<Predicate> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let r: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("missing arity line".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("arity: {e}")))?;
        if !(2..=MAX_ARITY).contains(&r) {
            return Err(Error::BadArity(r));
        }
        let bits: Vec<u8> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing table line".into()))?
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::Parse(format!("bad table entry {other:?}"))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != 1 << r {
            return Err(Error::BadTruthTable(format!(
                "length {} != 2^{r}",
                bits.len()
            )));
        }
        // File order: coordinate 1 most significant. Internal: coordinate 1
        // is the least significant bit.
        let mut table = vec![0u8; 1 << r];
        for (file_idx, &b) in bits.iter().enumerate() {
            table[reverse_bits(file_idx, r)] = b;
        }
        Predicate::fourier_transform(r, &table)
    }

    pub fn to_text(&self) -> String {
        let size = 1usize << self.r;
        let bits: Vec<String> = (0..size)
            .map(|file_idx| self.truth_table[reverse_bits(file_idx, self.r)].to_string())
            .collect();
        format!("{}\n{}\n", self.r, bits.join(" "))
    }

    /// Built-in predicates used throughout the test and CLI surfaces.
    pub fn by_name(name: &str) -> Result<Predicate> {
        match name {
            "maxcut2" => Predicate::maxcut2(),
            "nae3" => Predicate::nae3(),
            "xor4even" => Predicate::xor4even(),
            other => Err(Error::Parse(format!("unknown predicate {other:?}"))),
        }
    }

    /// f(x1,x2) = (1 - x1 x2)/2: satisfied when the endpoints disagree.
    pub fn maxcut2() -> Result<Predicate> {
        Predicate::fourier_transform(2, &[0, 1, 1, 0])
    }

    /// Not-all-equal on three literals.
    pub fn nae3() -> Result<Predicate> {
        let table: Vec<u8> = (0..8u8).map(|m| u8::from(m != 0 && m != 7)).collect();
        Predicate::fourier_transform(3, &table)
    }

    /// f = (1 + x1 x2 x3 x4)/2: even-parity 4-XOR.
    pub fn xor4even() -> Result<Predicate> {
        let table: Vec<u8> = (0..16u32).map(|m| 1 - (m.count_ones() % 2) as u8).collect();
        Predicate::fourier_transform(4, &table)
    }
}

fn reverse_bits(mask: usize, r: usize) -> usize {
    let mut out = 0usize;
    for k in 0..r {
        if mask & (1 << k) != 0 {
            out |= 1 << (r - 1 - k);
        }
    }
    out
}

/// xi(s) = sum_{j>=1} w_j s^j with w_j the Fourier weight of f at degree j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePolynomial {
    /// weights[j-1] = ||f^{=j}||^2
    weights: Vec<f64>,
}

impl MixturePolynomial {
    pub fn new(weights: Vec<f64>) -> Result<MixturePolynomial> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::BadParameter(
                "mixture weights must be non-negative and finite".into(),
            ));
        }
        Ok(MixturePolynomial { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.weights.len()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn scaled(&self, c: f64) -> MixturePolynomial {
        MixturePolynomial {
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }

    pub fn xi(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for &w in self.weights.iter().rev() {
            acc = (acc + w) * s;
        }
        acc
    }

    pub fn xi_prime(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for (j, &w) in self.weights.iter().enumerate() {
            acc += w * (j + 1) as f64 * pow;
            pow *= s;
        }
        acc
    }

    pub fn xi_second(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate().skip(1) {
            let j = (i + 1) as f64;
            acc += w * j * (j - 1.0) * s.powi(i as i32 - 1);
        }
        acc
    }

    /// Antiderivative of t * xi''(t): sum_j w_j (j-1) t^j. Used for the
    /// correction integral of the Parisi functional.
    pub fn correction_antiderivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w * i as f64 * t.powi(i as i32 + 1);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn reconstruct(p: &Predicate, mask: usize) -> f64 {
        let point: Vec<f64> = (0..p.arity())
            .map(|k| if mask & (1 << k) != 0 { -1.0 } else { 1.0 })
            .collect();
        p.multilinear(&point)
    }

    fn check_exact(p: &Predicate) {
        let size = 1usize << p.arity();
        let mut parseval = 0.0;
        for mask in 0..size {
            let err = (reconstruct(p, mask) - p.value(mask) as f64).abs();
            assert!(err < 1e-12, "reconstruction error {err}");
        }
        for &c in p.fourier_coeffs() {
            parseval += c * c;
        }
        assert!((parseval - p.mean()).abs() < 1e-12, "Parseval violated");
        assert!((p.fourier(0) - p.mean()).abs() < 1e-15);
    }

    #[test]
    fn maxcut2_expansion() {
        let p = Predicate::maxcut2().unwrap();
        assert_eq!(p.mean(), 0.5);
        assert_eq!(p.fourier(0b11), -0.5);
        assert_eq!(p.fourier(0b01), 0.0);
        assert_eq!(p.fourier(0b10), 0.0);
        check_exact(&p);
    }

    #[test]
    fn constant_predicate() {
        let p = Predicate::fourier_transform(2, &[1, 1, 1, 1]).unwrap();
        assert_eq!(p.fourier(0), 1.0);
        for mask in 1..4 {
            assert_eq!(p.fourier(mask), 0.0);
        }
    }

    #[test]
    fn nae3_expansion_matches_brute_force() {
        let p = Predicate::nae3().unwrap();
        // Independent oracle: direct correlation sums.
        for mask in 0..8usize {
            let mut sum = 0.0;
            for x in 0..8usize {
                let chi = if (mask & x).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                sum += p.value(x) as f64 * chi;
            }
            let oracle = sum / 8.0;
            assert!((p.fourier(mask) - oracle).abs() < 1e-15);
        }
        assert!((p.fourier(0) - 0.75).abs() < 1e-15);
        for mask in [0b011usize, 0b101, 0b110] {
            assert!((p.fourier(mask) + 0.25).abs() < 1e-15);
        }
        for mask in [0b001usize, 0b010, 0b100, 0b111] {
            assert_eq!(p.fourier(mask), 0.0);
        }
        check_exact(&p);
    }

    #[test]
    fn mixture_values() {
        let p = Predicate::maxcut2().unwrap();
        let xi = p.mixture();
        assert_eq!(xi.weights(), &[0.0, 0.25]);
        assert!((xi.xi(0.6) - 0.09).abs() < 1e-15);
        assert!((xi.xi_prime(0.6) - 0.3).abs() < 1e-15);
        assert!((xi.xi_second(0.6) - 0.5).abs() < 1e-15);
        assert_eq!(xi.xi(0.0), 0.0);

        let nae = Predicate::nae3().unwrap().mixture();
        assert!((nae.xi(1.0) - 3.0 / 16.0).abs() < 1e-15);

        let xor = Predicate::xor4even().unwrap().mixture();
        assert_eq!(xor.weights(), &[0.0, 0.0, 0.0, 0.25]);
        assert!((xor.xi(0.5) - 0.5f64.powi(4) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_weight_identity() {
        // sum_{j>=1} w_j = E[f] - E[f]^2 for 0/1-valued f.
        let mut rng = rand::thread_rng();
        for r in [2usize, 3, 4] {
            for _ in 0..50 {
                let table: Vec<u8> = (0..1 << r).map(|_| rng.gen_range(0..2u8)).collect();
                let p = Predicate::fourier_transform(r, &table).unwrap();
                let total: f64 = p.mixture().weights().iter().sum();
                let expect = p.mean() - p.mean() * p.mean();
                assert!((total - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partial_derivative_cases() {
        let p = Predicate::maxcut2().unwrap();
        let d = p.partial_derivative(1, &[0.7, 0.4]).unwrap();
        assert!((d + 0.2).abs() < 1e-15);

        // Even predicate with no linear part: derivative at zero is zero.
        let nae = Predicate::nae3().unwrap();
        for coord in 1..=3 {
            let d = nae.partial_derivative(coord, &[0.0, 0.0, 0.0]).unwrap();
            assert_eq!(d, 0.0);
        }

        let xor = Predicate::xor4even().unwrap();
        let d = xor.partial_derivative(2, &[0.5, 9.0, 0.5, 0.5]).unwrap();
        assert!((d - 0.0625).abs() < 1e-15);
        let d2 = xor.partial_derivative(2, &[0.5, -3.0, 0.5, 0.5]).unwrap();
        assert_eq!(d, d2);

        assert!(p.partial_derivative(3, &[0.0, 0.0]).is_err());
        assert!(p.partial_derivative(0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn flags_cases() {
        let p = Predicate::maxcut2().unwrap();
        assert_eq!(
            p.flags(),
            PredicateFlags { is_even: true, has_linear: false }
        );
        // f = (1 + x1)/2
        let lin = Predicate::fourier_transform(2, &[1, 0, 1, 0]).unwrap();
        assert!(lin.flags().has_linear);
        let nae = Predicate::nae3().unwrap();
        assert_eq!(
            nae.flags(),
            PredicateFlags { is_even: true, has_linear: false }
        );
    }

    #[test]
    fn arity_bounds_rejected() {
        assert!(Predicate::fourier_transform(1, &[0, 1]).is_err());
        assert!(Predicate::fourier_transform(13, &vec![0; 1 << 13]).is_err());
        assert!(Predicate::fourier_transform(2, &[0, 1, 2, 0]).is_err());
        assert!(Predicate::fourier_transform(2, &[0, 1, 1]).is_err());
    }

    #[test]
    fn text_round_trip_and_order() {
        let p = Predicate::maxcut2().unwrap();
        let text = p.to_text();
        assert_eq!(text, "2\n0 1 1 0\n");
        let q = Predicate::from_text(&text).unwrap();
        assert_eq!(p.truth_table(), q.truth_table());

        // Asymmetric predicate pins the MSB-first convention: f = 1 only at
        // (x1, x2) = (-1, +1), file index 0b10 = 2.
        let mut table = vec![0u8; 4];
        table[0b01] = 1; // internal: x1 = -1 bit is LSB
        let p = Predicate::fourier_transform(2, &table).unwrap();
        assert_eq!(p.to_text(), "2\n0 0 1 0\n");
        let q = Predicate::from_text("2\n0 0 1 0\n").unwrap();
        assert_eq!(q.truth_table(), p.truth_table());
    }

    #[test]
    fn exhaustive_r2_tables() {
        for bits in 0..16u32 {
            let table: Vec<u8> = (0..4).map(|i| ((bits >> i) & 1) as u8).collect();
            let p = Predicate::fourier_transform(2, &table).unwrap();
            check_exact(&p);
        }
    }

    proptest! {
        #[test]
        fn random_tables_reconstruct(r in 3usize..=4, seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let table: Vec<u8> = (0..1usize << r).map(|_| rng.gen_range(0..2u8)).collect();
            let p = Predicate::fourier_transform(r, &table).unwrap();
            check_exact(&p);
        }

        #[test]
        fn xi_prime_matches_finite_difference(seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let r = rng.gen_range(2usize..=4);
            let table: Vec<u8> = (0..1usize << r).map(|_| rng.gen_range(0..2u8)).collect();
            let xi = Predicate::fourier_transform(r, &table).unwrap().mixture();
            let h = 1e-6;
            for k in 1..=9 {
                let s = k as f64 * 0.1;
                let fd = (xi.xi(s + h) - xi.xi(s - h)) / (2.0 * h);
                prop_assert!((fd - xi.xi_prime(s)).abs() < 1e-6);
            }
        }

        #[test]
        fn derivative_ignores_own_coordinate(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let r = rng.gen_range(2usize..=4);
            let table: Vec<u8> = (0..1usize << r).map(|_| rng.gen_range(0..2u8)).collect();
            let p = Predicate::fourier_transform(r, &table).unwrap();
            let coord = rng.gen_range(1..=r);
            let mut point: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
            point[coord - 1] = a;
            let d1 = p.partial_derivative(coord, &point).unwrap();
            point[coord - 1] = b;
            let d2 = p.partial_derivative(coord, &point).unwrap();
            prop_assert_eq!(d1, d2);
        }
    }
}
