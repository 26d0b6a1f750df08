//! Sparse random CSP instances as directed r-uniform hypergraphs.
//!
//! Clauses are stored flat: incidence `e = a * r + iota` is slot `iota` of
//! clause `a`, holding a variable id and a sign. The adjacency table is the
//! exact transpose (CSR over variables, listing incidence indices).

use crate::error::{Error, Result};
use crate::predicate::Predicate;
use crate::rng::stream_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct CspInstance {
    n: usize,
    r: usize,
    /// Uniform degree when index-regular, else None.
    d: Option<usize>,
    clause_vars: Vec<u32>,
    clause_signs: Vec<i8>,
    adj_offsets: Vec<u32>,
    adj_incidences: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularizationStats {
    pub removed_clauses: usize,
    pub added_clauses: usize,
    pub alpha_prime: usize,
    pub treelike_fraction_before: f64,
    pub treelike_fraction_after: f64,
}

impl CspInstance {
    fn from_clauses(
        n: usize,
        r: usize,
        d: Option<usize>,
        clause_vars: Vec<u32>,
        clause_signs: Vec<i8>,
    ) -> Result<CspInstance> {
        if clause_vars.len() != clause_signs.len() || clause_vars.len() % r != 0 {
            return Err(Error::BadParameter("ragged clause arrays".into()));
        }
        if clause_vars.iter().any(|&v| v as usize >= n) {
            return Err(Error::BadParameter("variable id out of range".into()));
        }
        if clause_signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::BadParameter("signs must be +-1".into()));
        }
        let mut counts = vec![0u32; n + 1];
        for &v in &clause_vars {
            counts[v as usize + 1] += 1;
        }
        let mut adj_offsets = counts;
        for i in 0..n {
            adj_offsets[i + 1] += adj_offsets[i];
        }
        let mut cursor = adj_offsets.clone();
        let mut adj_incidences = vec![0u32; clause_vars.len()];
        for (e, &v) in clause_vars.iter().enumerate() {
            adj_incidences[cursor[v as usize] as usize] = e as u32;
            cursor[v as usize] += 1;
        }
        let inst = CspInstance {
            n,
            r,
            d,
            clause_vars,
            clause_signs,
            adj_offsets,
            adj_incidences,
        };
        if d.is_some() {
            inst.validate_index_regular()?;
        }
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> usize {
        self.clause_vars.len() / self.r
    }

    pub fn degree(&self) -> Option<usize> {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.m() as f64 / self.n as f64
    }

    /// Variable at incidence `e = a*r + iota`.
    #[inline]
    pub fn var_at(&self, e: usize) -> usize {
        self.clause_vars[e] as usize
    }

    #[inline]
    pub fn sign_at(&self, e: usize) -> f64 {
        self.clause_signs[e] as f64
    }

    pub fn clause_vars(&self) -> &[u32] {
        &self.clause_vars
    }

    pub fn clause_signs(&self) -> &[i8] {
        &self.clause_signs
    }

    /// Incidence indices of all slots held by variable `v`.
    #[inline]
    pub fn incidences(&self, v: usize) -> &[u32] {
        &self.adj_incidences[self.adj_offsets[v] as usize..self.adj_offsets[v + 1] as usize]
    }

    pub fn var_degree(&self, v: usize) -> usize {
        (self.adj_offsets[v + 1] - self.adj_offsets[v]) as usize
    }

    /// Clauses mentioning the same variable more than once. Allowed by the
    /// sampling model; reported because they vanish only as n grows.
    pub fn repeated_variable_clauses(&self) -> usize {
        let r = self.r;
        (0..self.m())
            .filter(|&a| {
                let slots = &self.clause_vars[a * r..(a + 1) * r];
                (1..r).any(|i| slots[..i].contains(&slots[i]))
            })
            .count()
    }

    /// Checks the exact index-regularity invariant: every variable occurs in
    /// d/r clauses at every index position.
    pub fn validate_index_regular(&self) -> Result<()> {
        let d = self
            .d
            .ok_or_else(|| Error::NotIndexRegular("degree not set".into()))?;
        if d % self.r != 0 {
            return Err(Error::NotIndexRegular(format!("r does not divide d={d}")));
        }
        let per_index = d / self.r;
        let mut counts = vec![0u32; self.n * self.r];
        for (e, &v) in self.clause_vars.iter().enumerate() {
            counts[v as usize * self.r + e % self.r] += 1;
        }
        for v in 0..self.n {
            for iota in 0..self.r {
                let c = counts[v * self.r + iota] as usize;
                if c != per_index {
                    return Err(Error::NotIndexRegular(format!(
                        "variable {v} has {c} slots at index {iota}, expected {per_index}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mean clause value (1/m) sum_e f(eps .* x_e) for a +-1 assignment.
    pub fn evaluate(&self, p: &Predicate, assignment: &[i8]) -> Result<f64> {
        if assignment.len() != self.n {
            return Err(Error::BadAssignment(format!(
                "length {} != n {}",
                assignment.len(),
                self.n
            )));
        }
        if assignment.iter().any(|&x| x != 1 && x != -1) {
            return Err(Error::BadAssignment("entries must be +-1".into()));
        }
        if p.arity() != self.r {
            return Err(Error::BadParameter("predicate arity != instance r".into()));
        }
        let r = self.r;
        let mut satisfied = 0u64;
        for a in 0..self.m() {
            let mut mask = 0usize;
            for iota in 0..r {
                let e = a * r + iota;
                let lit = self.clause_signs[e] as i32 * assignment[self.clause_vars[e] as usize] as i32;
                if lit < 0 {
                    mask |= 1 << iota;
                }
            }
            satisfied += p.value(mask) as u64;
        }
        Ok(satisfied as f64 / self.m() as f64)
    }

    /// Serializes to the text format: header `n m r d`, then one line per
    /// clause with r zero-based ids and r signs.
    pub fn to_text(&self) -> String {
        let r = self.r;
        let mut out = String::with_capacity(self.clause_vars.len() * 8);
        let _ = writeln!(out, "{} {} {} {}", self.n, self.m(), r, self.d.unwrap_or(0));
        for a in 0..self.m() {
            for iota in 0..r {
                if iota > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.clause_vars[a * r + iota]);
            }
            for iota in 0..r {
                out.push(' ');
                out.push(if self.clause_signs[a * r + iota] > 0 { '+' } else { '-' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<CspInstance> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("header: {e}"))))
            .collect::<Result<_>>()?;
        let [n, m, r, d] = head[..] else {
            return Err(Error::Parse("header must be `n m r d`".into()));
        };
        let mut clause_vars = Vec::with_capacity(m * r);
        let mut clause_signs = Vec::with_capacity(m * r);
        for (idx, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 * r {
                return Err(Error::Parse(format!("clause line {idx}: expected {} tokens", 2 * r)));
            }
            for t in &toks[..r] {
                clause_vars.push(
                    t.parse::<u32>()
                        .map_err(|e| Error::Parse(format!("clause line {idx}: {e}")))?,
                );
            }
            for t in &toks[r..] {
                clause_signs.push(match *t {
                    "+" => 1,
                    "-" => -1,
                    other => return Err(Error::Parse(format!("bad sign {other:?}"))),
                });
            }
        }
        if clause_vars.len() != m * r {
            return Err(Error::Parse(format!(
                "expected {m} clauses, found {}",
                clause_vars.len() / r
            )));
        }
        CspInstance::from_clauses(n, r, (d > 0).then_some(d), clause_vars, clause_signs)
    }

    /// Returns a copy with the given sign vector (for gauge experiments).
    pub fn with_signs(&self, signs: Vec<i8>) -> Result<CspInstance> {
        CspInstance::from_clauses(self.n, self.r, self.d, self.clause_vars.clone(), signs)
    }
}

/// Draws m = round(alpha n) clauses with variable ids i.i.d. uniform over
/// [n] (repeats allowed) and i.i.d. uniform signs.
pub fn sample_csp(n: usize, alpha: f64, p: &Predicate, seed: u64) -> Result<CspInstance> {
    sample_csp_r(n, alpha, p.arity(), seed)
}

pub fn sample_csp_r(n: usize, alpha: f64, r: usize, seed: u64) -> Result<CspInstance> {
    // n < r is legal: clause variables are i.i.d. and may repeat
    if n == 0 || !(alpha > 0.0) {
        return Err(Error::BadParameter(format!("need n >= 1 and alpha > 0, got n={n} alpha={alpha}")));
    }
    let m = (alpha * n as f64).round() as u64;
    if m == 0 || m.saturating_mul(r as u64) > u32::MAX as u64 {
        return Err(Error::Overflow(format!("m = {m} clauses")));
    }
    let m = m as usize;
    let mut rng = stream_rng(seed, crate::rng::stream::INSTANCE);
    let mut clause_vars = Vec::with_capacity(m * r);
    let mut clause_signs = Vec::with_capacity(m * r);
    for _ in 0..m * r {
        clause_vars.push(rng.gen_range(0..n as u32));
        clause_signs.push(if rng.gen::<bool>() { 1 } else { -1 });
    }
    CspInstance::from_clauses(n, r, None, clause_vars, clause_signs)
}

/// Exactly d-index-regular instance via one uniform permutation per index:
/// each variable fills d/r slots at every index position.
pub fn sample_index_regular(n: usize, d: usize, r: usize, seed: u64) -> Result<CspInstance> {
    if r == 0 || d == 0 || d % r != 0 {
        return Err(Error::Divisibility(format!("r={r} must divide d={d}")));
    }
    let per_index = d / r;
    let m = n
        .checked_mul(per_index)
        .ok_or_else(|| Error::Overflow("n*d/r".into()))?;
    if m == 0 {
        return Err(Error::BadParameter("need n*d/r >= 1".into()));
    }
    if m * r > u32::MAX as usize {
        return Err(Error::Overflow(format!("{} incidences", m * r)));
    }
    let mut rng = stream_rng(seed, crate::rng::stream::INSTANCE);
    let mut clause_vars = vec![0u32; m * r];
    let mut slots: Vec<u32> = Vec::with_capacity(m);
    for iota in 0..r {
        slots.clear();
        for v in 0..n as u32 {
            for _ in 0..per_index {
                slots.push(v);
            }
        }
        slots.shuffle(&mut rng);
        for (a, &v) in slots.iter().enumerate() {
            clause_vars[a * r + iota] = v;
        }
    }
    let clause_signs: Vec<i8> = (0..m * r)
        .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
        .collect();
    CspInstance::from_clauses(n, r, Some(d), clause_vars, clause_signs)
}

/// Repairs a sampled instance into an exactly d'-index-regular one:
/// clauses at over-degree (v, iota) pairs are removed (highest clause id
/// first, for determinism), then fresh clauses are added with slot
/// variables drawn proportionally to the residual degree deficit.
pub fn index_regularize(
    inst: &CspInstance,
    tree_radius: usize,
    seed: u64,
) -> Result<(CspInstance, RegularizationStats)> {
    let n = inst.n;
    let r = inst.r;
    let m = inst.m();
    let d_avg = r as f64 * m as f64 / n as f64;
    // natural log; the asymptotics are base-independent
    let alpha_prime = ((d_avg + d_avg.sqrt() * d_avg.ln()) / r as f64).ceil() as usize;
    let treelike_before = treelike_fraction(inst, tree_radius);

    // Phase 1: drop clauses while any deg(v, iota) exceeds alpha'.
    let mut counts = vec![0u32; n * r];
    for (e, &v) in inst.clause_vars.iter().enumerate() {
        counts[v as usize * r + e % r] += 1;
    }
    let mut alive = vec![true; m];
    let mut removed = 0usize;
    for v in 0..n {
        for iota in 0..r {
            if counts[v * r + iota] as usize <= alpha_prime {
                continue;
            }
            // walk this variable's incidences at index iota, highest clause first
            let mut excess = counts[v * r + iota] as usize - alpha_prime;
            for &e in inst.incidences(v).iter().rev() {
                if excess == 0 {
                    break;
                }
                let (a, slot) = (e as usize / r, e as usize % r);
                if slot == iota && alive[a] {
                    alive[a] = false;
                    removed += 1;
                    for k in 0..r {
                        let ee = a * r + k;
                        counts[inst.clause_vars[ee] as usize * r + k] -= 1;
                    }
                    // removal may have fixed this pair already
                    let now = counts[v * r + iota] as usize;
                    excess = now.saturating_sub(alpha_prime);
                }
            }
        }
    }

    // Phase 2: fill every (v, iota) up to alpha' by pairing residual slots.
    // Sequential proportional sampling without replacement is a uniform
    // permutation of the residual multiset, built per index.
    let mut rng = stream_rng(seed, crate::rng::stream::INSTANCE);
    let survivors: Vec<usize> = (0..m).filter(|&a| alive[a]).collect();
    let added = n * alpha_prime - survivors.len();
    let mut clause_vars = Vec::with_capacity((survivors.len() + added) * r);
    let mut clause_signs = Vec::with_capacity((survivors.len() + added) * r);
    for &a in &survivors {
        for k in 0..r {
            clause_vars.push(inst.clause_vars[a * r + k]);
            clause_signs.push(inst.clause_signs[a * r + k]);
        }
    }
    let mut new_slots: Vec<Vec<u32>> = Vec::with_capacity(r);
    for iota in 0..r {
        let mut slots = Vec::with_capacity(added);
        for v in 0..n {
            let deficit = alpha_prime - counts[v * r + iota] as usize;
            for _ in 0..deficit {
                slots.push(v as u32);
            }
        }
        if slots.len() != added {
            return Err(Error::RegularizationFailed {
                attempts: 1,
                reason: format!("residual mismatch at index {iota}"),
            });
        }
        slots.shuffle(&mut rng);
        new_slots.push(slots);
    }
    for j in 0..added {
        for iota in 0..r {
            clause_vars.push(new_slots[iota][j]);
            clause_signs.push(if rng.gen::<bool>() { 1 } else { -1 });
        }
    }
    let out = CspInstance::from_clauses(n, r, Some(r * alpha_prime), clause_vars, clause_signs)?;
    let treelike_after = treelike_fraction(&out, tree_radius);
    Ok((
        out,
        RegularizationStats {
            removed_clauses: removed,
            added_clauses: added,
            alpha_prime,
            treelike_fraction_before: treelike_before,
            treelike_fraction_after: treelike_after,
        },
    ))
}

/// Fraction of variables whose radius-(L+1) factor-graph neighborhood is a
/// tree. Distance counts hypergraph vertices: sharing a clause is distance 1.
pub fn treelike_fraction(inst: &CspInstance, radius: usize) -> f64 {
    let flags = treelike_flags(inst, radius);
    flags.iter().filter(|&&t| t).count() as f64 / inst.n.max(1) as f64
}

/// Per-variable treelike indicator at the given radius.
pub fn treelike_flags(inst: &CspInstance, radius: usize) -> Vec<bool> {
    use rayon::prelude::*;
    (0..inst.n)
        .into_par_iter()
        .map(|v| is_treelike(inst, v, radius))
        .collect()
}

/// BFS over the factor graph from `v`, exploring clauses incident to
/// variables at distance <= radius. Any node reached twice (other than the
/// tree edge back to the parent clause) witnesses a cycle, as does a clause
/// repeating a variable.
pub fn is_treelike(inst: &CspInstance, v: usize, radius: usize) -> bool {
    let r = inst.r;
    let mut seen_var = std::collections::HashSet::new();
    let mut seen_clause = std::collections::HashSet::new();
    // (variable, clause it was discovered through)
    let mut frontier: Vec<(usize, Option<usize>)> = vec![(v, None)];
    seen_var.insert(v);
    for _depth in 0..=radius {
        let mut next = Vec::new();
        for &(u, parent) in &frontier {
            let mut parent_hits = 0usize;
            for &e in inst.incidences(u) {
                let a = e as usize / r;
                if Some(a) == parent {
                    parent_hits += 1;
                    if parent_hits > 1 {
                        return false; // u fills two slots of its parent clause
                    }
                    continue;
                }
                if !seen_clause.insert(a) {
                    return false; // clause reachable two ways
                }
                let mut own = 0usize;
                for k in 0..r {
                    let w = inst.clause_vars[a * r + k] as usize;
                    if w == u {
                        own += 1;
                        continue;
                    }
                    if !seen_var.insert(w) {
                        return false; // variable reachable two ways
                    }
                    next.push((w, Some(a)));
                }
                if own > 1 {
                    return false; // clause repeats a variable
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::Predicate;

    #[test]
    fn single_variable_forced_clause() {
        let p = Predicate::maxcut2().unwrap();
        let inst = sample_csp(1, 1.0, &p, 42).unwrap();
        assert_eq!(inst.m(), 1);
        assert_eq!(inst.clause_vars(), &[0, 0]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = Predicate::maxcut2().unwrap();
        let a = sample_csp(500, 4.0, &p, 9).unwrap();
        let b = sample_csp(500, 4.0, &p, 9).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = sample_csp(500, 4.0, &p, 10).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn mean_degree_concentrates() {
        let p = Predicate::maxcut2().unwrap();
        let inst = sample_csp(100_000, 128.0, &p, 7).unwrap();
        let mean_deg = inst.clause_vars().len() as f64 / inst.n() as f64;
        assert!((mean_deg - 256.0).abs() < 0.1);
    }

    #[test]
    fn text_round_trip() {
        let inst = sample_index_regular(40, 6, 3, 3).unwrap();
        let text = inst.to_text();
        let back = CspInstance::from_text(&text).unwrap();
        assert_eq!(text, back.to_text());
        assert_eq!(back.degree(), Some(6));
    }

    #[test]
    fn index_regular_exact_by_construction() {
        for (n, d, r) in [(2usize, 2usize, 2usize), (30, 6, 2), (40, 9, 3), (25, 8, 4)] {
            let inst = sample_index_regular(n, d, r, 11).unwrap();
            inst.validate_index_regular().unwrap();
            assert_eq!(inst.m(), n * d / r);
        }
        assert!(sample_index_regular(10, 5, 2, 0).is_err());
    }

    #[test]
    fn tiny_regular_profile() {
        let inst = sample_index_regular(2, 2, 2, 5).unwrap();
        assert_eq!(inst.m(), 2);
        for v in 0..2 {
            assert_eq!(inst.var_degree(v), 2);
        }
    }

    #[test]
    fn adjacency_is_transpose() {
        let inst = sample_csp_r(200, 3.0, 3, 1).unwrap();
        for v in 0..inst.n() {
            for &e in inst.incidences(v) {
                assert_eq!(inst.var_at(e as usize), v);
            }
        }
        let total: usize = (0..inst.n()).map(|v| inst.incidences(v).len()).sum();
        assert_eq!(total, inst.m() * inst.r());
    }

    #[test]
    fn star_is_treelike_triangle_is_not() {
        let star = CspInstance::from_clauses(3, 3, None, vec![0, 1, 2], vec![1, 1, 1]).unwrap();
        for radius in 0..4 {
            assert_eq!(treelike_fraction(&star, radius), 1.0);
        }
        let tri = CspInstance::from_clauses(
            3,
            2,
            None,
            vec![0, 1, 1, 2, 2, 0],
            vec![1; 6],
        )
        .unwrap();
        assert_eq!(treelike_fraction(&tri, 1), 0.0);
        assert_eq!(treelike_fraction(&tri, 0), 1.0);
    }

    #[test]
    fn treelike_monotone_in_radius() {
        let inst = sample_index_regular(300, 4, 2, 2).unwrap();
        let mut prev = 1.0;
        for radius in 0..4 {
            let f = treelike_fraction(&inst, radius);
            assert!(f <= prev + 1e-12);
            prev = f;
        }
    }

    #[test]
    fn sparse_regular_mostly_treelike() {
        let inst = sample_index_regular(100_000, 4, 2, 17).unwrap();
        assert!(treelike_fraction(&inst, 2) >= 0.99);
    }

    #[test]
    fn evaluate_cases() {
        let p = Predicate::maxcut2().unwrap();
        let inst = CspInstance::from_clauses(2, 2, None, vec![0, 1], vec![1, 1]).unwrap();
        assert_eq!(inst.evaluate(&p, &[1, -1]).unwrap(), 1.0);
        assert_eq!(inst.evaluate(&p, &[1, 1]).unwrap(), 0.0);
        let ones = Predicate::fourier_transform(2, &[1, 1, 1, 1]).unwrap();
        assert_eq!(inst.evaluate(&ones, &[1, 1]).unwrap(), 1.0);
        assert!(inst.evaluate(&p, &[1, 0]).is_err());
        assert!(inst.evaluate(&p, &[1]).is_err());
    }

    #[test]
    fn random_assignment_near_mean() {
        let p = Predicate::maxcut2().unwrap();
        let inst = sample_csp(10_000, 64.0, &p, 23).unwrap();
        let mut rng = stream_rng(99, 0);
        let x: Vec<i8> = (0..inst.n()).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let val = inst.evaluate(&p, &x).unwrap();
        assert!((val - 0.5).abs() < 0.02, "value {val}");
    }

    #[test]
    fn gauge_invariance_exact() {
        let p = Predicate::nae3().unwrap();
        let inst = sample_csp(60, 3.0, &p, 4).unwrap();
        let mut rng = stream_rng(5, 1);
        let x: Vec<i8> = (0..inst.n()).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let base = inst.evaluate(&p, &x).unwrap();
        // flip variable 7 everywhere
        let flip = 7usize;
        let mut signs = inst.clause_signs().to_vec();
        for (e, &v) in inst.clause_vars().iter().enumerate() {
            if v as usize == flip {
                signs[e] = -signs[e];
            }
        }
        let flipped = inst.with_signs(signs).unwrap();
        let mut x2 = x.clone();
        x2[flip] = -x2[flip];
        assert_eq!(base, flipped.evaluate(&p, &x2).unwrap());
    }

    #[test]
    fn regularize_fixed_point_and_arithmetic() {
        // alpha' arithmetic: d=256, r=2 -> 173.
        let d_avg = 256.0f64;
        let ap = ((d_avg + d_avg.sqrt() * d_avg.ln()) / 2.0).ceil() as usize;
        assert_eq!(ap, 173);

        // An already-regular instance at the target degree is untouched.
        let n = 64;
        let r = 2;
        let inst = sample_index_regular(n, 2 * 4, r, 8).unwrap();
        // with m = n*4 clauses, d_avg = 8, alpha' = ceil((8 + sqrt8 ln8)/2) = 7 > 4,
        // so clauses are only added, none removed
        let (out, stats) = index_regularize(&inst, 0, 77).unwrap();
        assert_eq!(stats.removed_clauses, 0);
        out.validate_index_regular().unwrap();
        assert_eq!(out.degree(), Some(2 * stats.alpha_prime));
    }

    #[test]
    fn regularize_random_instance() {
        let p = Predicate::maxcut2().unwrap();
        let inst = sample_csp(2_000, 16.0, &p, 3).unwrap();
        let (out, stats) = index_regularize(&inst, 0, 4).unwrap();
        out.validate_index_regular().unwrap();
        assert!(stats.removed_clauses as f64 / inst.m() as f64 <= 0.01);
        assert!(stats.alpha_prime >= 16);
    }
}
