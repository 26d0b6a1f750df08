//! The iterative message-passing engine.
//!
//! One iteration reads the frozen level-l state, computes every clause's
//! partial-derivative messages once, then updates node and node-to-factor
//! quantities:
//!
//! ```text
//! A = clamp(Phi_xx(dl, x) * c_l, +-K)
//! w_i      = d^{-1/2}   sum_{b in di} g_{i,b}
//! w_{i->a} = (d-1)^{-1/2} (sqrt(d) w_i - g_{i,a})
//! u = w^{l+1} - w^l,   z += A u,
//! x += xi''(dl) mu(dl) Phi_x(dl, x) delta + sqrt(r) u
//! ```
//!
//! Directed state is stored variable-major (adjacency order) so the update
//! phase writes disjoint contiguous blocks; the clause phase writes the
//! g-buffer clause-major. Identical inputs give bit-identical results for
//! any thread count: every array slot is a pure function of the frozen
//! state, and reductions fold fixed-size chunk partials in order.

use crate::error::{Error, Result};
use crate::instance::CspInstance;
use crate::parisi::ParisiSolution;
use crate::predicate::Predicate;
use crate::rng::{standard_normal, stream, uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const VAR_CHUNK: usize = 1024;
const CLAUSE_CHUNK: usize = 2048;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub delta: f64,
    pub seed: u64,
    /// Seed for the randomized rounding streams (defaults to `seed`).
    pub round_seed: u64,
    /// Nonlinearity clamp K; None picks 10x the largest |Phi_xx| c_l seen
    /// in the table over the in-range iterations, so clamping is inactive
    /// in the bulk.
    pub clamp: Option<f64>,
    /// Keep node u/A histories plus a directed-pair subsample.
    pub record_history: bool,
    /// Cap on the directed-pair history subsample.
    pub history_cap: usize,
    /// Iterations at which to capture full directed z/A snapshots
    /// (incidence order), for the variance-parameter recurrence.
    pub snapshot_levels: Vec<usize>,
    /// Normalize each iteration with the population second moment of
    /// Phi_xx over the algorithm's own x-values instead of the diffusion
    /// proxy supplied through `consts`.
    pub self_normalize: bool,
}

impl RunConfig {
    pub fn new(delta: f64, seed: u64) -> RunConfig {
        RunConfig {
            delta,
            seed,
            round_seed: seed,
            clamp: None,
            record_history: false,
            history_cap: 200_000,
            snapshot_levels: Vec::new(),
            self_normalize: false,
        }
    }

    pub fn levels(&self) -> usize {
        (1.0 / self.delta).floor() as usize
    }
}

/// Everything that identifies a run apart from its seed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub d: usize,
    pub delta: f64,
    pub levels: usize,
    pub eta: f64,
    pub clamp: f64,
    pub predicate_hash: u64,
    pub consts_hash: u64,
    pub record_history: bool,
    pub version: String,
}

/// Per-level running statistics. Message-level arrays (`u`, `z`) are
/// indexed 1..=L via `[level - 1]`; iteration arrays (`a_u2`, proximity)
/// are indexed 0..L-1.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LevelStats {
    pub mean_u_dir: Vec<f64>,
    pub var_u_dir: Vec<f64>,
    pub m4_u_dir: Vec<f64>,
    pub mean_u_node: Vec<f64>,
    pub var_u_node: Vec<f64>,
    pub mean_z2_dir: Vec<f64>,
    /// (1/n) sum_i A_i^l (u_i^{l+1})^2 — the value-decomposition summand.
    pub mean_a_u2_node: Vec<f64>,
    /// (1/n) sum_i (A_i^l)^2; Property 2 predicts delta/nu_{l+1}.
    pub mean_a2_node: Vec<f64>,
    /// (1/n) sum_i z_i^l A_i^l u_i^{l+1}; the martingale cross term.
    pub mean_zau_node: Vec<f64>,
    pub prox_u: Vec<f64>,
    pub prox_a: Vec<f64>,
    pub clamp_hits: Vec<u64>,
}

/// Optional full histories for the statistical verification layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHistories {
    /// node u^l for l = 1..=L, each of length n
    pub node_u: Vec<Vec<f64>>,
    /// node A^l for l = 0..L-1, each of length n
    pub node_a: Vec<Vec<f64>>,
    /// directed u^l at the sampled incidences, l = 1..=L
    pub dir_u: Vec<Vec<f64>>,
    /// incidence ids of the directed subsample
    pub dir_sample: Vec<u32>,
    /// variable owning each sampled incidence (correlation clusters)
    pub dir_sample_vars: Vec<u32>,
    pub z0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    /// z^l per incidence (clause-major)
    pub z_dir: Vec<f64>,
    /// A^l per incidence
    pub a_dir: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ConfigEcho,
    pub seed: u64,
    pub z_final: Vec<f64>,
    pub truncated: Vec<f64>,
    pub assignment: Vec<i8>,
    pub satisfying_fraction: f64,
    /// Clause mean of the multilinear f at the raw spins z^L.
    pub mean_f_z: f64,
    /// Clause mean of f at trnc(z^L).
    pub mean_f_truncated: f64,
    pub stats: LevelStats,
    /// Bulky artifacts live in sidecar files, not the result JSON.
    #[serde(skip)]
    pub histories: Option<RunHistories>,
    #[serde(skip)]
    pub snapshots: BTreeMap<usize, Snapshot>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValueDecomposition {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// trnc: clip to [-1, 1].
#[inline]
pub fn trnc(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// Truncate and independently round each entry: +1 with probability
/// (1 + trnc(z_i))/2, from the per-vertex rounding stream.
pub fn round(z: &[f64], seed: u64) -> (Vec<f64>, Vec<i8>) {
    let truncated: Vec<f64> = z.iter().map(|&v| trnc(v)).collect();
    let assignment: Vec<i8> = truncated
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let p_up = 0.5 * (1.0 + t);
            if uniform(seed, stream::ROUNDING + i as u64) < p_up {
                1
            } else {
                -1
            }
        })
        .collect();
    (truncated, assignment)
}

#[derive(Clone, Copy, Default)]
struct DirState {
    z: f64,
    w: f64,
    x: f64,
}

#[derive(Clone, Copy, Default)]
struct NodeState {
    z: f64,
    w: f64,
    x: f64,
}

#[derive(Default, Clone, Copy)]
struct Accum {
    sum_u_dir: f64,
    sum_u2_dir: f64,
    sum_u4_dir: f64,
    sum_z2_dir: f64,
    sum_u_node: f64,
    sum_u2_node: f64,
    sum_a_u2_node: f64,
    sum_a2_node: f64,
    sum_zau_node: f64,
    sum_prox_u: f64,
    sum_prox_a: f64,
    clamp_hits: u64,
}

impl Accum {
    fn merge(&mut self, o: &Accum) {
        self.sum_u_dir += o.sum_u_dir;
        self.sum_u2_dir += o.sum_u2_dir;
        self.sum_u4_dir += o.sum_u4_dir;
        self.sum_z2_dir += o.sum_z2_dir;
        self.sum_u_node += o.sum_u_node;
        self.sum_u2_node += o.sum_u2_node;
        self.sum_a_u2_node += o.sum_a_u2_node;
        self.sum_a2_node += o.sum_a2_node;
        self.sum_zau_node += o.sum_zau_node;
        self.sum_prox_u += o.sum_prox_u;
        self.sum_prox_a += o.sum_prox_a;
        self.clamp_hits += o.clamp_hits;
    }
}

fn fnv_f64s(values: &[f64]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    hash
}

/// Executes L = floor(1/delta) iterations and rounds the result.
pub fn run(
    inst: &CspInstance,
    pred: &Predicate,
    sol: &ParisiSolution,
    consts: &[f64],
    cfg: &RunConfig,
) -> Result<RunResult> {
    let start = std::time::Instant::now();
    let d = inst
        .degree()
        .ok_or_else(|| Error::DegreeMismatch("engine requires an index-regular instance".into()))?;
    inst.validate_index_regular()?;
    let r = inst.r();
    let n = inst.n();
    let m = inst.m();
    if pred.arity() != r {
        return Err(Error::DegreeMismatch(format!(
            "predicate arity {} != instance r {r}",
            pred.arity()
        )));
    }
    if pred.flags().has_linear {
        return Err(Error::LinearPredicate);
    }
    let xi = pred.mixture();
    if xi.is_zero() {
        return Err(Error::DegeneratePredicate);
    }
    if xi != sol.xi {
        return Err(Error::BadParameter("solution was computed for a different mixture".into()));
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 0.5) {
        return Err(Error::BadParameter(format!("delta {} outside (0, 0.5]", cfg.delta)));
    }
    let levels = cfg.levels();
    if consts.len() < levels {
        return Err(Error::BadParameter(format!(
            "need {levels} nonlinearity constants, got {}",
            consts.len()
        )));
    }
    if (sol.grid.nt - 1) as f64 * sol.grid.dt < 1.0 - 1e-9 {
        return Err(Error::BadGrid("Parisi table does not cover [0, 1]".into()));
    }
    let delta = cfg.delta;
    // last iteration still covered by the table's trusted range
    let l_star = (((1.0 - sol.eta) / delta) + 1e-9).floor() as usize;

    let clamp = cfg.clamp.unwrap_or_else(|| {
        let mut peak = 0.0f64;
        for l in 0..=l_star.min(levels.saturating_sub(1)) {
            let j = ((l as f64 * delta) / sol.grid.dt).round() as usize;
            let j = j.min(sol.grid.nt - 1);
            let row = &sol.grid.phi_xx[j * sol.grid.nx..(j + 1) * sol.grid.nx];
            let row_max = row.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
            peak = peak.max(row_max * consts[l]);
        }
        10.0 * peak.max(1.0)
    });

    let sqrt_d = (d as f64).sqrt();
    let sqrt_dm1 = ((d - 1).max(1) as f64).sqrt();
    let sqrt_r = (r as f64).sqrt();

    // coefficient list without the empty set, for derivative messages
    let deriv_coeffs: Vec<(u16, f64)> = (1..1usize << r)
        .filter(|&mask| pred.fourier(mask) != 0.0)
        .map(|mask| (mask as u16, pred.fourier(mask)))
        .collect();

    // z0 per vertex; node and directed state
    let z0: Vec<f64> = (0..n)
        .map(|i| delta.sqrt() * standard_normal(cfg.seed, i as u64))
        .collect();
    let mut nodes: Vec<NodeState> = z0
        .iter()
        .map(|&z| NodeState { z, w: 0.0, x: 0.0 })
        .collect();
    // adjacency-ordered directed state plus the incidence permutation
    let mut adj_of_inc = vec![0u32; m * r];
    let mut inc_of_adj = vec![0u32; m * r];
    {
        let mut pos = 0u32;
        for v in 0..n {
            for &e in inst.incidences(v) {
                adj_of_inc[e as usize] = pos;
                inc_of_adj[pos as usize] = e;
                pos += 1;
            }
        }
    }
    let mut dirs: Vec<DirState> = inc_of_adj
        .iter()
        .map(|&e| DirState { z: z0[inst.var_at(e as usize)], w: 0.0, x: 0.0 })
        .collect();
    let mut g = vec![0.0f64; m * r];
    let mut u_node_buf = vec![0.0f64; n];
    let mut a_node_buf = vec![0.0f64; n];
    let mut u_dir_buf = if cfg.record_history { vec![0.0f64; m * r] } else { Vec::new() };
    // directed A values are only materialized when iterations continue past
    // the eta cutoff and need freezing
    let needs_freeze = levels > l_star + 1;
    let mut a_dir_buf = if needs_freeze { vec![0.0f64; m * r] } else { Vec::new() };

    // frozen nonlinearities past the eta cutoff
    let mut frozen_a_node: Option<Vec<f64>> = None;
    let mut frozen_a_dir: Option<Vec<f64>> = None;

    let dir_sample: Vec<u32> = if cfg.record_history {
        let total = m * r;
        let stride = (total / cfg.history_cap.max(1)).max(1);
        (0..total).step_by(stride).map(|e| e as u32).collect()
    } else {
        Vec::new()
    };
    let mut histories = cfg.record_history.then(|| RunHistories {
        node_u: Vec::with_capacity(levels),
        node_a: Vec::with_capacity(levels),
        dir_u: Vec::with_capacity(levels),
        dir_sample: dir_sample.clone(),
        dir_sample_vars: dir_sample.iter().map(|&e| inst.var_at(e as usize) as u32).collect(),
        z0: z0.clone(),
    });
    let mut snapshots = BTreeMap::new();

    let mut stats = LevelStats::default();
    let clause_signs = inst.clause_signs();

    for level in 0..levels {
        let t = level as f64 * delta;
        let in_range = level <= l_star;
        let grid = &sol.grid;
        let (c_node_l, c_dir_l) = if cfg.self_normalize && in_range {
            let nu = crate::analysis::nu(&xi, delta, level + 1, r)?;
            let m2 = |xs: &mut dyn Iterator<Item = f64>| -> f64 {
                let mut sum = 0.0;
                let mut count = 0usize;
                for x in xs {
                    let v = grid.sample_phi_xx(t, x);
                    sum += v * v;
                    count += 1;
                }
                sum / count as f64
            };
            let m2_node = m2(&mut nodes.iter().map(|s| s.x));
            let m2_dir = m2(&mut dirs.iter().map(|s| s.x));
            if m2_node <= 0.0 || m2_dir <= 0.0 {
                return Err(Error::NanAtIteration(level));
            }
            ((delta / (nu * m2_node)).sqrt(), (delta / (nu * m2_dir)).sqrt())
        } else {
            let c = consts[level.min(l_star)];
            (c, c)
        };
        let c_l = c_dir_l;
        let drift_scale = xi.xi_second(t) * sol.mu.eval(t) * delta;

        if cfg.snapshot_levels.contains(&level) {
            let mut z_dir = vec![0.0; m * r];
            for (pos, &e) in inc_of_adj.iter().enumerate() {
                z_dir[e as usize] = dirs[pos].z;
            }
            let a_dir: Vec<f64> = (0..m * r)
                .map(|e| {
                    let pos = adj_of_inc[e] as usize;
                    if in_range {
                        (grid.sample_phi_xx(t, dirs[pos].x) * c_l).clamp(-clamp, clamp)
                    } else {
                        frozen_a_dir.as_ref().map_or(0.0, |f| f[pos])
                    }
                })
                .collect();
            snapshots.insert(level, Snapshot { z_dir, a_dir });
        }

        // clause phase: g[e] = eps_e * D_{iota(e)} f(eps .* z_dir at the clause)
        g.par_chunks_mut(CLAUSE_CHUNK * r)
            .enumerate()
            .for_each(|(chunk_idx, gs)| {
                let mut y = vec![0.0f64; r];
                let mut prod = vec![0.0f64; 1 << r];
                let mut gvec = vec![0.0f64; r];
                prod[0] = 1.0;
                let a0 = chunk_idx * CLAUSE_CHUNK;
                for (ci, gc) in gs.chunks_exact_mut(r).enumerate() {
                    let base = (a0 + ci) * r;
                    for iota in 0..r {
                        y[iota] =
                            clause_signs[base + iota] as f64 * dirs[adj_of_inc[base + iota] as usize].z;
                    }
                    for mask in 1..1usize << r {
                        let low = mask & mask.wrapping_neg();
                        prod[mask] = prod[mask ^ low] * y[low.trailing_zeros() as usize];
                    }
                    gvec.iter_mut().for_each(|v| *v = 0.0);
                    for &(mask, c) in &deriv_coeffs {
                        let mut mm = mask as usize;
                        while mm != 0 {
                            let iota = mm.trailing_zeros() as usize;
                            gvec[iota] += c * prod[(mask as usize) ^ (1 << iota)];
                            mm &= mm - 1;
                        }
                    }
                    for iota in 0..r {
                        gc[iota] = clause_signs[base + iota] as f64 * gvec[iota];
                    }
                }
            });

        // variable phase: update node and directed states into level l+1
        let accums: Vec<Accum> = {
            let dir_chunk = VAR_CHUNK * d;
            let n_chunks = n.div_ceil(VAR_CHUNK);
            let u_dir_chunks: Vec<Option<&mut [f64]>> = if u_dir_buf.is_empty() {
                (0..n_chunks).map(|_| None).collect()
            } else {
                u_dir_buf.chunks_mut(dir_chunk).map(Some).collect()
            };
            let a_dir_chunks: Vec<Option<&mut [f64]>> = if a_dir_buf.is_empty() {
                (0..n_chunks).map(|_| None).collect()
            } else {
                a_dir_buf.chunks_mut(dir_chunk).map(Some).collect()
            };
            let frozen_node = frozen_a_node.as_deref();
            let frozen_dir = frozen_a_dir.as_deref();
            nodes
                .par_chunks_mut(VAR_CHUNK)
                .zip(dirs.par_chunks_mut(dir_chunk))
                .zip(u_node_buf.par_chunks_mut(VAR_CHUNK))
                .zip(a_node_buf.par_chunks_mut(VAR_CHUNK))
                .zip(u_dir_chunks.into_par_iter())
                .zip(a_dir_chunks.into_par_iter())
                .enumerate()
                .map(
                    |(
                        chunk_idx,
                        (((((node_c, dir_c), u_node_c), a_node_c), mut u_dir_c), mut a_dir_c),
                    )| {
                        let mut acc = Accum::default();
                        let v0 = chunk_idx * VAR_CHUNK;
                        for (vi, node) in node_c.iter_mut().enumerate() {
                            let v = v0 + vi;
                            let incs = inst.incidences(v);
                            let mut sum_g = 0.0;
                            for &e in incs {
                                sum_g += g[e as usize];
                            }
                            let w_new = sum_g / sqrt_d;
                            let u_node = w_new - node.w;
                            let a_node = if in_range {
                                let a = (grid.sample_phi_xx(t, node.x) * c_node_l).clamp(-clamp, clamp);
                                if a.abs() >= clamp {
                                    acc.clamp_hits += 1;
                                }
                                a
                            } else {
                                frozen_node.map_or(0.0, |f| f[v])
                            };
                            acc.sum_zau_node += node.z * a_node * u_node;
                            node.z += a_node * u_node;
                            node.x += drift_scale * grid.sample_phi_x(t, node.x) + sqrt_r * u_node;
                            node.w = w_new;
                            u_node_c[vi] = u_node;
                            a_node_c[vi] = a_node;
                            acc.sum_u_node += u_node;
                            acc.sum_u2_node += u_node * u_node;
                            acc.sum_a_u2_node += a_node * u_node * u_node;
                            acc.sum_a2_node += a_node * a_node;

                            for (k, &e) in incs.iter().enumerate() {
                                let dir = &mut dir_c[vi * d + k];
                                let w_dir_new = if d > 1 {
                                    (sqrt_d * w_new - g[e as usize]) / sqrt_dm1
                                } else {
                                    0.0
                                };
                                let u_dir = w_dir_new - dir.w;
                                let a_dir = if in_range {
                                    let a =
                                        (grid.sample_phi_xx(t, dir.x) * c_l).clamp(-clamp, clamp);
                                    if a.abs() >= clamp {
                                        acc.clamp_hits += 1;
                                    }
                                    a
                                } else {
                                    frozen_dir.map_or(0.0, |f| f[v * d + k])
                                };
                                dir.z += a_dir * u_dir;
                                dir.x += drift_scale * grid.sample_phi_x(t, dir.x) + sqrt_r * u_dir;
                                dir.w = w_dir_new;
                                if let Some(buf) = u_dir_c.as_deref_mut() {
                                    buf[vi * d + k] = u_dir;
                                }
                                if let Some(buf) = a_dir_c.as_deref_mut() {
                                    buf[vi * d + k] = a_dir;
                                }
                                acc.sum_u_dir += u_dir;
                                acc.sum_u2_dir += u_dir * u_dir;
                                acc.sum_u4_dir += u_dir * u_dir * u_dir * u_dir;
                                acc.sum_z2_dir += dir.z * dir.z;
                                let du = u_node - u_dir;
                                acc.sum_prox_u += du * du;
                                let da = a_node - a_dir;
                                acc.sum_prox_a += da * da;
                            }
                        }
                        acc
                    },
                )
                .collect()
        };
        let mut total = Accum::default();
        for a in &accums {
            total.merge(a);
        }
        let nd = (m * r) as f64;
        let nf = n as f64;
        if !(total.sum_u2_dir.is_finite() && total.sum_z2_dir.is_finite() && total.sum_u2_node.is_finite()) {
            return Err(Error::NanAtIteration(level));
        }
        let mean_u = total.sum_u_dir / nd;
        stats.mean_u_dir.push(mean_u);
        stats.var_u_dir.push((total.sum_u2_dir / nd - mean_u * mean_u).max(0.0));
        stats.m4_u_dir.push(total.sum_u4_dir / nd);
        let mean_un = total.sum_u_node / nf;
        stats.mean_u_node.push(mean_un);
        stats.var_u_node.push((total.sum_u2_node / nf - mean_un * mean_un).max(0.0));
        stats.mean_z2_dir.push(total.sum_z2_dir / nd);
        stats.mean_a_u2_node.push(total.sum_a_u2_node / nf);
        stats.mean_a2_node.push(total.sum_a2_node / nf);
        stats.mean_zau_node.push(total.sum_zau_node / nf);
        stats.prox_u.push(total.sum_prox_u / nd);
        stats.prox_a.push(total.sum_prox_a / nd);
        stats.clamp_hits.push(total.clamp_hits);

        if let Some(h) = histories.as_mut() {
            h.node_u.push(u_node_buf.clone());
            h.node_a.push(a_node_buf.clone());
            h.dir_u.push(
                dir_sample
                    .iter()
                    .map(|&e| u_dir_buf[adj_of_inc[e as usize] as usize])
                    .collect(),
            );
        }

        // hold the last in-range nonlinearities for the remaining iterations
        if needs_freeze && level == l_star {
            frozen_a_node = Some(a_node_buf.clone());
            frozen_a_dir = Some(a_dir_buf.clone());
        }
    }

    let z_final: Vec<f64> = nodes.iter().map(|s| s.z).collect();
    let (truncated, assignment) = round(&z_final, cfg.round_seed);
    let satisfying_fraction = inst.evaluate(pred, &assignment)?;
    let mean_f_z = clause_mean_f(inst, pred, &z_final);
    let trunc_vals: Vec<f64> = z_final.iter().map(|&v| trnc(v)).collect();
    let mean_f_truncated = clause_mean_f(inst, pred, &trunc_vals);

    let config = ConfigEcho {
        n,
        m,
        r,
        d,
        delta,
        levels,
        eta: sol.eta,
        clamp,
        predicate_hash: fnv_f64s(pred.fourier_coeffs()),
        consts_hash: fnv_f64s(consts),
        record_history: cfg.record_history,
        version: crate::VERSION.to_string(),
    };

    Ok(RunResult {
        config,
        seed: cfg.seed,
        z_final,
        truncated,
        assignment,
        satisfying_fraction,
        mean_f_z,
        mean_f_truncated,
        stats,
        histories,
        snapshots,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

/// Clause mean of the multilinear extension at real node values.
pub fn clause_mean_f(inst: &CspInstance, pred: &Predicate, values: &[f64]) -> f64 {
    let r = inst.r();
    let m = inst.m();
    let coeffs: Vec<(u16, f64)> = (0..1usize << r)
        .filter(|&mask| pred.fourier(mask) != 0.0)
        .map(|mask| (mask as u16, pred.fourier(mask)))
        .collect();
    let clause_vars = inst.clause_vars();
    let clause_signs = inst.clause_signs();
    let partials: Vec<f64> = (0..m)
        .into_par_iter()
        .chunks(CLAUSE_CHUNK)
        .map(|clauses| {
            let mut y = vec![0.0f64; r];
            let mut prod = vec![0.0f64; 1 << r];
            prod[0] = 1.0;
            let mut acc = 0.0;
            for a in clauses {
                for iota in 0..r {
                    let e = a * r + iota;
                    y[iota] = clause_signs[e] as f64 * values[clause_vars[e] as usize];
                }
                for mask in 1..1usize << r {
                    let low = mask & mask.wrapping_neg();
                    prod[mask] = prod[mask ^ low] * y[low.trailing_zeros() as usize];
                }
                for &(mask, c) in &coeffs {
                    acc += c * prod[mask as usize];
                }
            }
            acc
        })
        .collect();
    partials.iter().sum::<f64>() / m as f64
}

/// Theorem-style split of the pre-rounding clause mean: lhs is the measured
/// clause mean of f(z^L); rhs accumulates E[f] plus the per-iteration
/// (r/sqrt(d)) A u^2 terms.
pub fn value_decomposition(result: &RunResult, pred: &Predicate) -> Result<ValueDecomposition> {
    if !result.config.record_history {
        return Err(Error::MissingHistory);
    }
    let r = result.config.r as f64;
    let d = result.config.d as f64;
    let lhs = result.mean_f_z;
    let sum: f64 = result.stats.mean_a_u2_node.iter().sum();
    let rhs = pred.mean() + (r / d.sqrt()) * sum;
    Ok(ValueDecomposition { lhs, rhs, gap: (lhs - rhs).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::sample_index_regular;
    use crate::parisi::{
        functional_value, nonlinearity_constants, simulate_sde, solve_pde, GridConfig,
        ParisiSolution, StepFunction,
    };

    fn maxcut_solution(delta: f64) -> ParisiSolution {
        let pred = Predicate::maxcut2().unwrap();
        let xi = pred.mixture();
        let mu = StepFunction::zero();
        let cfg = GridConfig::for_mixture(&xi, delta);
        let grid = solve_pde(&xi, &mu, &cfg).unwrap();
        let value = functional_value(&grid, &xi, &mu);
        ParisiSolution { mu, grid, functional_value: value, xi, eta: 0.05, warning: false }
    }

    fn run_sized(n: usize, d: usize, seed: u64, record: bool) -> RunResult {
        let pred = Predicate::maxcut2().unwrap();
        let delta = 0.1;
        let sol = maxcut_solution(delta);
        let stats = simulate_sde(&sol, delta, 20_000, 11).unwrap();
        let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();
        let inst = sample_index_regular(n, d, 2, 5).unwrap();
        let mut cfg = RunConfig::new(delta, seed);
        cfg.record_history = record;
        run(&inst, &pred, &sol, &consts, &cfg).unwrap()
    }

    fn run_small(seed: u64, record: bool) -> RunResult {
        run_sized(2_000, 64, seed, record)
    }

    #[test]
    fn trnc_unit_cases() {
        assert_eq!(trnc(1.5), 1.0);
        assert_eq!(trnc(-2.0), -1.0);
        assert_eq!(trnc(0.3), 0.3);
    }

    #[test]
    fn rounding_is_deterministic_and_respects_certainty() {
        let z = vec![1.0, -1.0, 0.0, 2.5, -3.0];
        let (t, a) = round(&z, 9);
        let (t2, a2) = round(&z, 9);
        assert_eq!(t, t2);
        assert_eq!(a, a2);
        assert_eq!(a[0], 1);
        assert_eq!(a[1], -1);
        assert_eq!(a[3], 1);
        assert_eq!(a[4], -1);
        assert_eq!(t[3], 1.0);
    }

    #[test]
    fn rounding_mean_matches_trnc() {
        let z = vec![0.4, -0.7, 0.0, 1.3];
        let n_rounds = 10_000usize;
        let mut means = vec![0.0f64; z.len()];
        for k in 0..n_rounds {
            let (_, a) = round(&z, 1000 + k as u64);
            for (m, &s) in means.iter_mut().zip(&a) {
                *m += s as f64;
            }
        }
        for (i, m) in means.iter().enumerate() {
            let emp = m / n_rounds as f64;
            let expect = trnc(z[i]);
            let p = 0.5 * (1.0 + expect);
            let se = (4.0 * p * (1.0 - p) / n_rounds as f64).sqrt().max(1e-12);
            assert!((emp - expect).abs() <= 3.5 * se, "slot {i}: {emp} vs {expect}");
        }
    }

    #[test]
    fn run_is_deterministic() {
        let a = run_small(4, false);
        let b = run_small(4, false);
        assert_eq!(a.z_final, b.z_final);
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.satisfying_fraction, b.satisfying_fraction);
        let c = run_small(5, false);
        assert_ne!(a.z_final, c.z_final);
    }

    #[test]
    fn first_level_variance_matches_nu() {
        // Var(u^1) ~ nu_1 = xi'(delta)/r = delta/4 for the cut predicate.
        let res = run_small(7, false);
        let nu1 = 0.1 / 4.0;
        let var = res.stats.var_u_dir[0];
        assert!((var / nu1 - 1.0).abs() < 0.1, "var {var} vs {nu1}");
        // initial z's are shared across a vertex's messages, so the mean
        // fluctuates on the sqrt(nu/n) scale, not sqrt(nu/(n d))
        let mean_tol = 4.0 * (nu1 / 2000.0f64).sqrt();
        assert!(res.stats.mean_u_dir[0].abs() < mean_tol);
    }

    #[test]
    fn spin_second_moment_drifts_linearly() {
        // needs a locally treelike scale: keep d^2 well below n
        let res = run_sized(8_192, 32, 8, false);
        for (idx, &z2) in res.stats.mean_z2_dir.iter().enumerate() {
            let level = idx + 1;
            let expect = (level as f64 + 1.0) * 0.1;
            assert!(
                (z2 / expect - 1.0).abs() < 0.1,
                "level {level}: {z2} vs {expect}"
            );
        }
    }

    #[test]
    fn cumulative_replay_reconstructs_z() {
        let res = run_small(9, true);
        let h = res.histories.as_ref().unwrap();
        // replay a handful of vertices: z^L = z^0 + sum_l A^l u^{l+1}
        for v in (0..2000).step_by(171) {
            let mut z = h.z0[v];
            for l in 0..h.node_u.len() {
                z += h.node_a[l][v] * h.node_u[l][v];
            }
            assert_eq!(z, res.z_final[v], "vertex {v}");
        }
    }

    #[test]
    fn constant_predicate_refused() {
        let pred = Predicate::fourier_transform(2, &[1, 1, 1, 1]).unwrap();
        let sol = maxcut_solution(0.1);
        let inst = sample_index_regular(100, 8, 2, 1).unwrap();
        let cfg = RunConfig::new(0.1, 1);
        let err = run(&inst, &pred, &sol, &[1.0; 10], &cfg);
        assert!(matches!(err, Err(Error::DegeneratePredicate)));
    }

    #[test]
    fn linear_predicate_refused() {
        let pred = Predicate::fourier_transform(2, &[1, 0, 1, 0]).unwrap();
        let sol = maxcut_solution(0.1);
        let inst = sample_index_regular(100, 8, 2, 1).unwrap();
        let cfg = RunConfig::new(0.1, 1);
        assert!(matches!(
            run(&inst, &pred, &sol, &[1.0; 10], &cfg),
            Err(Error::LinearPredicate)
        ));
    }

    #[test]
    fn irregular_instance_refused() {
        let pred = Predicate::maxcut2().unwrap();
        let sol = maxcut_solution(0.1);
        let inst = crate::instance::sample_csp(100, 4.0, &pred, 1).unwrap();
        let cfg = RunConfig::new(0.1, 1);
        assert!(run(&inst, &pred, &sol, &[1.0; 10], &cfg).is_err());
    }

    #[test]
    fn beats_random_assignment() {
        let res = run_small(10, false);
        assert!(res.satisfying_fraction >= 0.5 - 2.0 / (2000.0f64).sqrt());
        // and in fact should visibly improve on random at this size
        assert!(res.satisfying_fraction > 0.5);
    }

    #[test]
    fn value_decomposition_small_gap() {
        let res = run_small(11, true);
        let pred = Predicate::maxcut2().unwrap();
        let v = value_decomposition(&res, &pred).unwrap();
        assert!(v.rhs > 0.5, "rhs should exceed E[f], got {}", v.rhs);
        assert!(v.gap < 0.05, "gap {}", v.gap);
        let no_hist = run_small(11, false);
        assert!(value_decomposition(&no_hist, &pred).is_err());
    }
}
