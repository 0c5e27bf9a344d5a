//! Graph sampling, encoding and interleaving for repetition-aided IRA codes.

use super::CodeEnsemble;
use crate::rng::rng_from_seed;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// A sampled code realization.
///
/// Information edge `e` touches information bit `edge_var[e]` and check
/// `e / alpha`. Check `m` additionally touches accumulator states `p_{m-1}`
/// (for `m > 0`) and `p_m`. The transmitted word is `q` systematic copies of
/// the information bits followed by the `M` parity bits.
#[derive(Debug, Clone)]
pub struct CodeGraph {
    pub k: usize,
    pub m: usize,
    pub q: usize,
    pub alpha: usize,
    /// Realized codeword length `q*K + M`.
    pub n: usize,
    /// Information bit per edge, grouped by check (`alpha` consecutive edges).
    pub edge_var: Vec<u32>,
    /// Edge ids grouped per information bit (CSR layout with `var_offsets`).
    pub var_edges: Vec<u32>,
    pub var_offsets: Vec<u32>,
    /// Realized rate `K / n`.
    pub realized_rate: f64,
}

impl CodeGraph {
    pub fn edge_count(&self) -> usize {
        self.edge_var.len()
    }

    pub fn degree_of(&self, var: usize) -> usize {
        (self.var_offsets[var + 1] - self.var_offsets[var]) as usize
    }

    /// FNV-1a over the edge list; stable fingerprint for determinism checks.
    pub fn structure_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.k as u64);
        eat(self.q as u64);
        eat(self.alpha as u64);
        for &v in &self.edge_var {
            eat(v as u64);
        }
        h
    }
}

/// Samples a code graph of the ensemble at its configured length.
///
/// Information-node degrees follow the node-perspective fractions (largest
/// remainder rounding); edge sockets are permuted uniformly and grouped
/// `alpha` per check; a repair pass swaps sockets until no check touches the
/// same information bit twice (a few sweeps suffice in practice).
pub fn build_code(ens: &CodeEnsemble, seed: u64) -> Result<CodeGraph> {
    let q = ens.q;
    let alpha = ens.alpha;
    // K from the target length: n ~= qK + E/alpha
    let k = ((ens.n as f64) / (q as f64 + ens.avg_degree() / alpha as f64)).round() as usize;
    if k < 2 {
        return Err(Error::Invalid("profile unrealizable: fewer than two information bits".into()));
    }
    let fractions = ens.node_fractions();
    let mut counts: Vec<usize> = fractions.iter().map(|&(_, f)| (f * k as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    // largest remainder
    let mut rem: Vec<(f64, usize)> = fractions
        .iter()
        .enumerate()
        .map(|(j, &(_, f))| (f * k as f64 - counts[j] as f64, j))
        .collect();
    rem.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(_, j) in rem.iter().take(k - assigned) {
        counts[j] += 1;
    }

    let mut rng = rng_from_seed(seed);
    let mut degrees: Vec<usize> = Vec::with_capacity(k);
    for (j, &(d, _)) in fractions.iter().enumerate() {
        degrees.extend(std::iter::repeat(d).take(counts[j]));
    }
    degrees.shuffle(&mut rng);
    // pad the edge count to a multiple of alpha
    let mut e: usize = degrees.iter().sum();
    while e % alpha != 0 {
        let j = rng.gen_range(0..k);
        degrees[j] += 1;
        e += 1;
    }
    let m = e / alpha;
    if m < 2 {
        return Err(Error::Invalid("profile unrealizable: fewer than two checks".into()));
    }

    let mut edge_var: Vec<u32> = Vec::with_capacity(e);
    for (v, &d) in degrees.iter().enumerate() {
        edge_var.extend(std::iter::repeat(v as u32).take(d));
    }
    edge_var.shuffle(&mut rng);

    // repair: no information bit may appear twice in one check
    let mut clean = false;
    for _sweep in 0..32 {
        clean = true;
        for c in 0..m {
            let base = c * alpha;
            for a in 1..alpha {
                let dup = (0..a).any(|b| edge_var[base + b] == edge_var[base + a]);
                if dup {
                    clean = false;
                    let swap_with = rng.gen_range(0..e);
                    edge_var.swap(base + a, swap_with);
                }
            }
        }
        if clean {
            break;
        }
    }
    if !clean {
        return Err(Error::NonConvergence(
            "could not remove duplicate sockets within the check layer".into(),
        ));
    }

    // CSR by variable
    let mut var_offsets = vec![0u32; k + 1];
    for &v in &edge_var {
        var_offsets[v as usize + 1] += 1;
    }
    for i in 0..k {
        var_offsets[i + 1] += var_offsets[i];
    }
    let mut cursor = var_offsets.clone();
    let mut var_edges = vec![0u32; e];
    for (eid, &v) in edge_var.iter().enumerate() {
        var_edges[cursor[v as usize] as usize] = eid as u32;
        cursor[v as usize] += 1;
    }

    let n = q * k + m;
    Ok(CodeGraph {
        k,
        m,
        q,
        alpha,
        n,
        edge_var,
        var_edges,
        var_offsets,
        realized_rate: k as f64 / n as f64,
    })
}

/// Systematic encode: `q` copies of the information bits, then the
/// accumulator parities `p_m = p_{m-1} XOR (XOR of the check's info edges)`.
pub fn encode(graph: &CodeGraph, info: &[u8]) -> Result<Vec<u8>> {
    if info.len() != graph.k {
        return Err(Error::Dimension(format!(
            "{} information bits for K = {}",
            info.len(),
            graph.k
        )));
    }
    if info.iter().any(|&b| b > 1) {
        return Err(Error::Invalid("bits must be 0 or 1".into()));
    }
    let mut cw = Vec::with_capacity(graph.n);
    for _ in 0..graph.q {
        cw.extend_from_slice(info);
    }
    let mut acc = 0u8;
    for c in 0..graph.m {
        let base = c * graph.alpha;
        for a in 0..graph.alpha {
            acc ^= info[graph.edge_var[base + a] as usize];
        }
        cw.push(acc);
    }
    Ok(cw)
}

/// Checks that a word satisfies every parity constraint.
pub fn syndrome_ok(graph: &CodeGraph, word: &[u8]) -> bool {
    if word.len() != graph.n {
        return false;
    }
    let parity = &word[graph.q * graph.k..];
    let mut prev = 0u8;
    for c in 0..graph.m {
        let base = c * graph.alpha;
        let mut s = prev ^ parity[c];
        for a in 0..graph.alpha {
            s ^= word[graph.edge_var[base + a] as usize];
        }
        if s != 0 {
            return false;
        }
        prev = parity[c];
    }
    // systematic copies must agree
    for copy in 1..graph.q {
        for i in 0..graph.k {
            if word[copy * graph.k + i] != word[i] {
                return false;
            }
        }
    }
    true
}

/// A seeded random permutation with its inverse.
#[derive(Debug, Clone)]
pub struct Interleaver {
    perm: Vec<u32>,
    inv: Vec<u32>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<u32> = (0..len as u32).collect();
        perm.shuffle(&mut rng_from_seed(seed));
        let mut inv = vec![0u32; len];
        for (i, &p) in perm.iter().enumerate() {
            inv[p as usize] = i as u32;
        }
        Self { perm, inv }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `out[t] = x[perm[t]]`.
    pub fn interleave<T: Copy + Default>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len());
        self.perm.iter().map(|&p| x[p as usize]).collect()
    }

    /// Inverse of [`Interleaver::interleave`].
    pub fn deinterleave<T: Copy + Default>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.inv.len());
        self.inv.iter().map(|&p| x[p as usize]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::presets;
    use rand::Rng;

    #[test]
    fn table_profile_realizes_nominal_rate() {
        let ens = presets::load_half();
        let g = build_code(&ens, 1).unwrap();
        assert!(
            (g.realized_rate - ens.rate_u).abs() / ens.rate_u < 0.01,
            "realized {}",
            g.realized_rate
        );
        assert!((g.n as f64 - ens.n as f64).abs() / ens.n as f64 < 0.02);
        // degree histogram within 1/E of the edge profile
        let e = g.edge_count() as f64;
        for &(d, f) in &ens.lambda {
            let edges_d: usize =
                (0..g.k).filter(|&v| g.degree_of(v) == d).map(|v| g.degree_of(v)).sum();
            assert!(
                (edges_d as f64 / e - f).abs() < 1.0 / e.sqrt(),
                "degree {d}: {} vs {f}",
                edges_d as f64 / e
            );
        }
    }

    #[test]
    fn regular_degenerate_profile() {
        let ens = CodeEnsemble::new(vec![(3, 1.0)], 1, 1, 0.25, 4000).unwrap();
        let g = build_code(&ens, 2).unwrap();
        for v in 0..g.k {
            assert_eq!(g.degree_of(v), 3);
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let ens = presets::load_one().with_length(8192);
        let a = build_code(&ens, 77).unwrap();
        let b = build_code(&ens, 77).unwrap();
        let c = build_code(&ens, 78).unwrap();
        assert_eq!(a.structure_hash(), b.structure_hash());
        assert_ne!(a.structure_hash(), c.structure_hash());
    }

    #[test]
    fn no_check_touches_a_bit_twice() {
        let g = build_code(&presets::load_three().with_length(20000), 3).unwrap();
        for c in 0..g.m {
            let base = c * g.alpha;
            for a in 1..g.alpha {
                assert_ne!(g.edge_var[base], g.edge_var[base + a], "check {c}");
            }
        }
    }

    #[test]
    fn encode_zero_maps_to_zero_and_syndrome_holds() {
        let g = build_code(&presets::load_half().with_length(8192), 4).unwrap();
        let zero = vec![0u8; g.k];
        let cw = encode(&g, &zero).unwrap();
        assert!(cw.iter().all(|&b| b == 0));
        let mut rng = crate::rng::rng_from_seed(9);
        let info: Vec<u8> = (0..g.k).map(|_| rng.gen_range(0..2u8)).collect();
        let cw = encode(&g, &info).unwrap();
        assert!(syndrome_ok(&g, &cw));
        // flipping any bit must break the syndrome
        let mut bad = cw.clone();
        bad[g.q * g.k + g.m / 2] ^= 1;
        assert!(!syndrome_ok(&g, &bad));
    }

    #[test]
    fn encode_is_linear() {
        let g = build_code(&presets::load_one().with_length(4096), 5).unwrap();
        let mut rng = crate::rng::rng_from_seed(10);
        let a: Vec<u8> = (0..g.k).map(|_| rng.gen_range(0..2u8)).collect();
        let b: Vec<u8> = (0..g.k).map(|_| rng.gen_range(0..2u8)).collect();
        let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ca = encode(&g, &a).unwrap();
        let cb = encode(&g, &b).unwrap();
        let cab = encode(&g, &ab).unwrap();
        for t in 0..g.n {
            assert_eq!(ca[t] ^ cb[t], cab[t]);
        }
    }

    #[test]
    fn encode_rejects_wrong_length() {
        let g = build_code(&presets::load_half().with_length(4096), 6).unwrap();
        assert!(encode(&g, &vec![0u8; g.k + 1]).is_err());
    }

    #[test]
    fn interleaver_round_trip_and_independence() {
        let il = Interleaver::new(1000, 42);
        let il2 = Interleaver::new(1000, 42);
        let il3 = Interleaver::new(1000, 43);
        let x: Vec<f64> = (0..1000).map(|t| t as f64 * 0.5).collect();
        let y = il.interleave(&x);
        assert_eq!(il.deinterleave(&y), x);
        assert_eq!(il2.interleave(&x), y);
        assert_ne!(il3.interleave(&x), y);
    }
}
