//! Flooding sum-product decoder for repetition-aided IRA graphs.

use super::graph::CodeGraph;
use crate::{Error, Result};

/// Message clamp; `tanh(15)` is 1 to within 4e-13, so wider messages carry
/// no extra information and only risk overflow downstream.
pub const LLR_CLAMP: f64 = 30.0;

const ATANH_GUARD: f64 = 1.0 - 1e-14;

/// Decoder output.
#[derive(Debug, Clone)]
pub struct DecodeOutput {
    /// Extrinsic LLR per channel position (a-posteriori minus that
    /// position's own channel LLR).
    pub extrinsic: Vec<f64>,
    /// Hard decisions on the information bits.
    pub hard_info: Vec<u8>,
    /// True when every parity check was satisfied.
    pub converged: bool,
    /// Iterations actually spent.
    pub iterations: usize,
}

#[inline]
fn clamp(x: f64) -> f64 {
    x.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// Zero-aware product state for one check node.
#[derive(Clone, Copy)]
struct CheckProduct {
    prod: f64,
    zeros: u32,
}

impl CheckProduct {
    fn new() -> Self {
        Self { prod: 1.0, zeros: 0 }
    }
    #[inline]
    fn push(&mut self, t: f64) {
        if t == 0.0 {
            self.zeros += 1;
        } else {
            self.prod *= t;
        }
    }
    /// Product of all pushed factors except one with value `t`.
    #[inline]
    fn exclude(&self, t: f64) -> f64 {
        if t == 0.0 {
            if self.zeros == 1 {
                self.prod
            } else {
                0.0
            }
        } else if self.zeros > 0 {
            0.0
        } else {
            self.prod / t
        }
    }
}

#[inline]
fn check_msg(x: f64) -> f64 {
    2.0 * x.clamp(-ATANH_GUARD, ATANH_GUARD).atanh()
}

/// Belief propagation on the full graph (information bits, accumulator
/// states and all checks), flooding schedule.
///
/// Stops early when the hard decisions satisfy every check, or when the
/// extrinsic variance has reached a fixed point (the message state stops
/// moving); non-convergence is reported through the flag, never as an error.
pub fn app_decode(graph: &CodeGraph, channel_llrs: &[f64], max_iter: usize) -> Result<DecodeOutput> {
    if channel_llrs.len() != graph.n {
        return Err(Error::Dimension(format!(
            "{} LLRs for codeword length {}",
            channel_llrs.len(),
            graph.n
        )));
    }
    if max_iter < 1 {
        return Err(Error::Invalid("max_iter must be at least 1".into()));
    }
    let (k, m, q, alpha, e) = (graph.k, graph.m, graph.q, graph.alpha, graph.edge_count());

    // channel aggregates
    let mut ch_info = vec![0.0f64; k];
    for c in 0..q {
        for i in 0..k {
            ch_info[i] += clamp(channel_llrs[c * k + i]);
        }
    }
    let ch_par: Vec<f64> = channel_llrs[q * k..].iter().map(|&x| clamp(x)).collect();

    // messages
    let mut v2c = vec![0.0f64; e];
    for (eid, &v) in graph.edge_var.iter().enumerate() {
        v2c[eid] = clamp(ch_info[v as usize]);
    }
    let mut c2v = vec![0.0f64; e];
    let mut pa: Vec<f64> = ch_par.clone(); // p_c -> check c
    let mut pb: Vec<f64> = ch_par[..m - 1].to_vec(); // p_c -> check c+1
    let mut ca = vec![0.0f64; m];
    let mut cb = vec![0.0f64; m - 1];

    let mut totals = vec![0.0f64; k];
    let mut papp = vec![0.0f64; m];
    let mut converged = false;
    let mut iterations = 0;
    let mut last_var = f64::INFINITY;
    let mut stall_strikes = 0u32;

    for it in 0..max_iter {
        iterations = it + 1;
        // check pass
        for c in 0..m {
            let base = c * alpha;
            let mut acc = CheckProduct::new();
            for a in 0..alpha {
                acc.push((0.5 * v2c[base + a]).tanh());
            }
            let tpa = (0.5 * pa[c]).tanh();
            acc.push(tpa);
            let tpb = if c > 0 {
                let t = (0.5 * pb[c - 1]).tanh();
                acc.push(t);
                t
            } else {
                1.0
            };
            for a in 0..alpha {
                let t = (0.5 * v2c[base + a]).tanh();
                c2v[base + a] = check_msg(acc.exclude(t));
            }
            ca[c] = check_msg(acc.exclude(tpa));
            if c > 0 {
                cb[c - 1] = check_msg(acc.exclude(tpb));
            }
        }
        // variable pass: information bits
        for i in 0..k {
            let mut tot = ch_info[i];
            let (s, t) = (graph.var_offsets[i] as usize, graph.var_offsets[i + 1] as usize);
            for &eid in &graph.var_edges[s..t] {
                tot += c2v[eid as usize];
            }
            totals[i] = tot;
            for &eid in &graph.var_edges[s..t] {
                v2c[eid as usize] = clamp(tot - c2v[eid as usize]);
            }
        }
        // variable pass: accumulator states (p_c joins checks c and c+1)
        for c in 0..m {
            let mut app = ch_par[c] + ca[c];
            if c < m - 1 {
                app += cb[c];
            }
            papp[c] = app;
            pa[c] = clamp(app - ca[c]);
            if c < m - 1 {
                pb[c] = clamp(app - cb[c]);
            }
        }
        // syndrome on hard decisions
        let mut ok = true;
        let mut prev = 0u8;
        'syn: for c in 0..m {
            let pc = (papp[c] < 0.0) as u8;
            let mut s = prev ^ pc;
            let base = c * alpha;
            for a in 0..alpha {
                s ^= (totals[graph.edge_var[base + a] as usize] < 0.0) as u8;
            }
            if s != 0 {
                ok = false;
                break 'syn;
            }
            prev = pc;
        }
        if ok {
            converged = true;
            break;
        }
        // fixed-point stall detection on the extrinsic variance
        if it % 8 == 7 {
            let var = extrinsic_variance_internal(graph, &totals, &papp, channel_llrs);
            if (var - last_var).abs() < 1e-6 {
                stall_strikes += 1;
                if stall_strikes >= 2 {
                    break;
                }
            } else {
                stall_strikes = 0;
            }
            last_var = var;
        }
    }

    // extrinsic per channel position
    let mut extrinsic = vec![0.0f64; graph.n];
    for c in 0..q {
        for i in 0..k {
            extrinsic[c * k + i] = totals[i] - clamp(channel_llrs[c * k + i]);
        }
    }
    for c in 0..m {
        extrinsic[q * k + c] = papp[c] - ch_par[c];
    }
    let hard_info: Vec<u8> = totals.iter().map(|&x| (x < 0.0) as u8).collect();
    Ok(DecodeOutput { extrinsic, hard_info, converged, iterations })
}

fn extrinsic_variance_internal(
    graph: &CodeGraph,
    totals: &[f64],
    papp: &[f64],
    channel_llrs: &[f64],
) -> f64 {
    let (k, q) = (graph.k, graph.q);
    let mut acc = 0.0;
    for c in 0..q {
        for i in 0..k {
            let l = totals[i] - clamp(channel_llrs[c * k + i]);
            let t = (0.5 * l.clamp(-60.0, 60.0)).tanh();
            acc += 1.0 - t * t;
        }
    }
    for c in 0..graph.m {
        let l = papp[c] - clamp(channel_llrs[q * k + c]);
        let t = (0.5 * l.clamp(-60.0, 60.0)).tanh();
        acc += 1.0 - t * t;
    }
    acc / graph.n as f64
}

/// Soft-symbol variance of an LLR block: mean of `1 - tanh^2(L/2)`.
pub fn extrinsic_variance(llrs: &[f64]) -> f64 {
    if llrs.is_empty() {
        return 1.0;
    }
    let acc: f64 = llrs
        .iter()
        .map(|&l| {
            let t = (0.5 * l.clamp(-60.0, 60.0)).tanh();
            1.0 - t * t
        })
        .sum();
    acc / llrs.len() as f64
}
