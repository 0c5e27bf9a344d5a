//! Variance-EXIT analysis of the coded iterative receiver: the J-function,
//! the large-system LMMSE transfer, Monte Carlo decoder transfer curves and
//! the decoding-threshold search.
//!
//! The coded link follows the real-signal convention end to end: BPSK `+-1`
//! symbols, real channel and real noise of variance `noise_var`, so an
//! equivalent observation `u = x + z` with `Var(z) = v_e` carries channel
//! LLRs `2u/v_e`, i.e. consistent Gaussians with `sigma^2 = 4/v_e`. This is
//! the accounting under which `Eb/N0 = P_u / (2 R_u noise_var)`.

use super::decoder::{app_decode, extrinsic_variance};
use super::graph::{build_code, encode, CodeGraph};
use super::CodeEnsemble;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sim::ebn0_to_noise_var;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Mutual information of a binary-input AWGN channel whose LLRs are
/// `N(sigma^2/2, sigma^2)` (the consistent-Gaussian family).
pub fn j_function(sigma: f64) -> f64 {
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    if sigma < 1e-9 {
        return 0.0;
    }
    if sigma > 70.0 {
        return 1.0;
    }
    let mu = sigma * sigma / 2.0;
    let loss = crate::quad::integrate(
        |z| {
            let l = mu + sigma * z;
            let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            // log2(1 + e^-l), stable on both tails
            let term = if l > 700.0 {
                0.0
            } else if l < -700.0 {
                -l / std::f64::consts::LN_2
            } else {
                (1.0 + (-l).exp()).ln() / std::f64::consts::LN_2
            };
            pdf * term
        },
        -12.0,
        12.0,
        1e-12,
    )
    .expect("smooth integrand converges");
    (1.0 - loss).clamp(0.0, 1.0)
}

/// Inverse of [`j_function`] by bisection; requires `0 <= i < 1`.
pub fn j_inverse(i: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&i) {
        return Err(Error::Invalid(format!("mutual information {i} outside [0, 1)")));
    }
    if i == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (1e-9, 70.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if j_function(mid) < i {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Large-system LMMSE variances for an IID Gaussian channel with unit-variance
/// entries, at a-priori variance `v` and `snr = v / noise_var`.
#[derive(Debug, Clone, Copy)]
pub struct LargeSystemTransfer {
    /// A-posteriori variance.
    pub posterior: f64,
    /// Extrinsic variance `1/phi`.
    pub extrinsic: f64,
}

/// Closed-form limit of the per-user LMMSE variances as the system grows with
/// fixed load `n_u/n_r`. Written in a cancellation-free form; exact algebraic
/// rearrangement of the textbook square-root expression.
pub fn detector_transfer_large_system(v: f64, snr: f64, n_u: usize, n_r: usize) -> LargeSystemTransfer {
    assert!(v > 0.0 && snr > 0.0, "variance and snr must be positive");
    let (nu, nr) = (n_u as f64, n_r as f64);
    let s = 1.0 / snr; // noise_var / v
    let a = nr - nu;
    let b = nr + nu;
    let d = ((s + a) * (s + a) + 4.0 * nu * s).sqrt();
    let posterior = 2.0 * v * s / (d + s + a);
    let extrinsic = v * s * (d + s + b) / (nr * (d + s + a));
    LargeSystemTransfer { posterior, extrinsic }
}

/// One sampled point of the decoder (or loop) transfer.
#[derive(Debug, Clone, Copy)]
pub struct ExitPoint {
    /// Equivalent-channel noise variance at the decoder input.
    pub v_in: f64,
    /// Decoder extrinsic soft-symbol variance.
    pub v_out: f64,
    /// A-priori mutual information implied by `v_in`.
    pub i_a: f64,
    /// Extrinsic mutual information measured from the decoder output.
    pub i_e: f64,
}

/// A Monte Carlo sampled decoder transfer curve with a monotone
/// (isotonic-regressed) interpolant.
#[derive(Debug, Clone)]
pub struct DecoderCurve {
    /// Sampled points, ascending in `v_in`; `v_out` holds the raw estimates.
    pub points: Vec<ExitPoint>,
    smoothed: Vec<f64>,
}

impl DecoderCurve {
    fn from_samples(mut points: Vec<ExitPoint>) -> Self {
        points.sort_by(|p, q| p.v_in.total_cmp(&q.v_in));
        let smoothed = isotonic_nondecreasing(&points.iter().map(|p| p.v_out).collect::<Vec<_>>());
        Self { points, smoothed }
    }

    /// Monotone interpolation of the smoothed transfer at `v_in = ve`
    /// (linear in `ln ve`, clamped at the sampled range).
    pub fn eval(&self, ve: f64) -> f64 {
        let n = self.points.len();
        if n == 0 {
            return 1.0;
        }
        if ve <= self.points[0].v_in {
            return self.smoothed[0];
        }
        if ve >= self.points[n - 1].v_in {
            return self.smoothed[n - 1];
        }
        let x = ve.ln();
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.points[mid].v_in <= ve {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (x0, x1) = (self.points[lo].v_in.ln(), self.points[hi].v_in.ln());
        let t = (x - x0) / (x1 - x0);
        self.smoothed[lo] * (1.0 - t) + self.smoothed[hi] * t
    }
}

/// Pool-adjacent-violators: least-squares nondecreasing fit.
fn isotonic_nondecreasing(y: &[f64]) -> Vec<f64> {
    let mut vals: Vec<f64> = Vec::with_capacity(y.len());
    let mut weights: Vec<f64> = Vec::with_capacity(y.len());
    for &v in y {
        vals.push(v);
        weights.push(1.0);
        while vals.len() > 1 && vals[vals.len() - 2] > vals[vals.len() - 1] {
            let (v1, w1) = (vals.pop().unwrap(), weights.pop().unwrap());
            let last = vals.len() - 1;
            let merged = (vals[last] * weights[last] + v1 * w1) / (weights[last] + w1);
            vals[last] = merged;
            weights[last] += w1;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (v, w) in vals.into_iter().zip(weights) {
        for _ in 0..w as usize {
            out.push(v);
        }
    }
    out
}

/// Nonparametric mutual information of LLRs against the true symbols:
/// `1 - E[log2(1 + e^{-x L})]`.
fn measured_mi(llrs: &[f64], bits: &[u8]) -> f64 {
    let mut acc = 0.0;
    for (&l, &b) in llrs.iter().zip(bits) {
        let xl = if b == 0 { l } else { -l };
        let term = if xl > 700.0 {
            0.0
        } else if xl < -700.0 {
            -xl / std::f64::consts::LN_2
        } else {
            (1.0 + (-xl).exp()).ln() / std::f64::consts::LN_2
        };
        acc += term;
    }
    (1.0 - acc / llrs.len() as f64).clamp(0.0, 1.0)
}

fn codeword_bits(graph: &CodeGraph, info: &[u8]) -> Vec<u8> {
    encode(graph, info).expect("info length matches graph")
}

/// Samples the decoder transfer on a grid of equivalent-channel variances.
///
/// For each grid value, `blocks_per_point` codewords are transmitted over the
/// equivalent real AWGN channel, decoded with up to `max_iter` sum-product
/// iterations, and the extrinsic variance (plus measured mutual informations)
/// is averaged into one [`ExitPoint`]. Deterministic in `seed`; grid points
/// run in parallel.
pub fn decoder_exit_trace(
    ens: &CodeEnsemble,
    blocks_per_point: usize,
    ve_grid: &[f64],
    max_iter: usize,
    seed: u64,
) -> Result<DecoderCurve> {
    if blocks_per_point == 0 {
        return Err(Error::Invalid("need at least one block per grid point".into()));
    }
    if ve_grid.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Invalid("equivalent variances must be positive".into()));
    }
    // graphs shared across grid points: common randomness keeps the sampled
    // curve smooth in ve
    let graphs: Vec<CodeGraph> = (0..blocks_per_point)
        .map(|b| build_code(ens, derive_seed(seed, b as u64)))
        .collect::<Result<_>>()?;

    let points: Vec<ExitPoint> = ve_grid
        .par_iter()
        .enumerate()
        .map(|(gi, &ve)| {
            let mut v_acc = 0.0;
            let mut ie_acc = 0.0;
            for (b, graph) in graphs.iter().enumerate() {
                let mut rng = rng_from_seed(derive_seed(seed, 1_000_003 * (gi as u64 + 1) + b as u64));
                let info: Vec<u8> = (0..graph.k).map(|_| rng.gen_range(0..2u8)).collect();
                let cw = codeword_bits(graph, &info);
                let llrs: Vec<f64> = cw
                    .iter()
                    .map(|&bit| {
                        let x = 1.0 - 2.0 * bit as f64;
                        let z: f64 = StandardNormal.sample(&mut rng);
                        2.0 * (x + z * ve.sqrt()) / ve
                    })
                    .collect();
                let out = app_decode(graph, &llrs, max_iter).expect("lengths match");
                v_acc += extrinsic_variance(&out.extrinsic);
                ie_acc += measured_mi(&out.extrinsic, &cw);
            }
            let nb = blocks_per_point as f64;
            ExitPoint {
                v_in: ve,
                v_out: v_acc / nb,
                i_a: j_function((4.0 / ve).sqrt()),
                i_e: ie_acc / nb,
            }
        })
        .collect();
    Ok(DecoderCurve::from_samples(points))
}

/// Where an alternating detector/decoder trajectory ended up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryOutcome {
    /// Variance crossed the success threshold within the step budget.
    Open { steps: usize },
    /// Variance stalled at the recorded fixed point.
    Stalled { v: f64 },
}

/// Runs the scalar EXIT trajectory `v -> detector -> decoder curve -> v`
/// from `v = 1`, recording each alternation.
pub fn exit_trajectory(
    curve: &DecoderCurve,
    n_u: usize,
    n_r: usize,
    noise_var: f64,
    max_steps: usize,
    success_v: f64,
) -> (Vec<ExitPoint>, TrajectoryOutcome) {
    let mut v = 1.0f64;
    let mut path = Vec::new();
    for step in 0..max_steps {
        let ve = detector_transfer_large_system(v.max(1e-12), v.max(1e-12) / noise_var, n_u, n_r)
            .extrinsic;
        let v_next = curve.eval(ve);
        path.push(ExitPoint {
            v_in: ve,
            v_out: v_next,
            i_a: j_function((4.0 / ve).sqrt()),
            i_e: f64::NAN,
        });
        if v_next <= success_v {
            return (path, TrajectoryOutcome::Open { steps: step + 1 });
        }
        if v_next >= v - 1e-9 {
            return (path, TrajectoryOutcome::Stalled { v: v_next });
        }
        v = v_next;
    }
    (path, TrajectoryOutcome::Stalled { v })
}

/// Options for [`find_threshold`].
#[derive(Debug, Clone)]
pub struct ThresholdOptions {
    /// Monte Carlo budget per transfer grid point (channel bits).
    pub bits_per_point: usize,
    /// Transfer-curve grid size.
    pub grid_points: usize,
    /// Decoder iteration cap per EXIT sample.
    pub max_iter: usize,
    /// Trajectory alternation budget.
    pub max_steps: usize,
    /// Success variance for an open tunnel.
    pub success_v: f64,
    /// Bisection bracket in dB.
    pub bracket_db: (f64, f64),
    pub seed: u64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            bits_per_point: 200_000,
            grid_points: 96,
            max_iter: 250,
            max_steps: 1000,
            success_v: 1e-4,
            bracket_db: (-18.0, -2.0),
            seed: 1,
        }
    }
}

/// Smallest `Eb/N0` (dB) with an open EXIT tunnel, to within `tol_db`.
///
/// The decoder transfer is sampled once on a grid wide enough for the whole
/// bracket, then bisection over `Eb/N0` reuses it; the bracket endpoints must
/// straddle the threshold or an error is returned.
pub fn find_threshold(
    ens: &CodeEnsemble,
    n_u: usize,
    n_r: usize,
    r_u: f64,
    tol_db: f64,
    opts: &ThresholdOptions,
) -> Result<(f64, DecoderCurve)> {
    if !(tol_db > 0.0) {
        return Err(Error::Invalid("tol_db must be positive".into()));
    }
    let (lo0, hi0) = opts.bracket_db;
    if !(hi0 > lo0) {
        return Err(Error::Invalid("bracket must satisfy lo < hi".into()));
    }
    let blocks = (opts.bits_per_point + ens.n - 1) / ens.n;
    // the grid must cover every ve the bisection can request
    let s2_hi = ebn0_to_noise_var(lo0, r_u, 1.0);
    let s2_lo = ebn0_to_noise_var(hi0, r_u, 1.0);
    let ve_min =
        detector_transfer_large_system(1e-7, 1e-7 / s2_lo, n_u, n_r).extrinsic * 0.7;
    let ve_max = detector_transfer_large_system(1.0, 1.0 / s2_hi, n_u, n_r).extrinsic * 1.1;
    let g = opts.grid_points.max(8);
    let ve_grid: Vec<f64> = (0..g)
        .map(|k| (ve_min.ln() + (ve_max / ve_min).ln() * k as f64 / (g - 1) as f64).exp())
        .collect();
    let curve = decoder_exit_trace(ens, blocks, &ve_grid, opts.max_iter, opts.seed)?;

    let open = |ebn0: f64| -> bool {
        let nv = ebn0_to_noise_var(ebn0, r_u, 1.0);
        matches!(
            exit_trajectory(&curve, n_u, n_r, nv, opts.max_steps, opts.success_v).1,
            TrajectoryOutcome::Open { .. }
        )
    };
    let (mut lo, mut hi) = (lo0, hi0);
    if open(lo) || !open(hi) {
        return Err(Error::NoBracket {
            lo,
            hi,
            flo: if open(lo) { 1.0 } else { 0.0 },
            fhi: if open(hi) { 1.0 } else { 0.0 },
        });
    }
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if open(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi), curve))
}
