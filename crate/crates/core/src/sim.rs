//! Coded-link simulation: the detector/decoder iterative receiver and Monte
//! Carlo bit error rate sweeps.
//!
//! The coded path uses BPSK `+-1` symbols embedded in the complex machinery.
//! Under [`ChannelModel::RealIid`] (the default, matching the threshold
//! analysis) channel entries and noise are real with per-entry variance
//! `noise_var`; under [`ChannelModel::ComplexIid`] they are circularly
//! symmetric with the same total variance, and bit LLRs use only the real
//! part (whose noise variance is half the total).

use crate::coding::{
    app_decode, encode, extrinsic_variance, build_code, CodeEnsemble, CodeGraph, Interleaver,
};
use crate::detector::{clamp_variance, phi_transfer, PriorState, VAR_FLOOR};
use crate::linalg::CMatrix;
use crate::model::{sample_iid_gaussian_channel, sample_iid_real_channel};
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// `noise_var = p_u / (2 r_u 10^(ebn0_db/10))`.
pub fn ebn0_to_noise_var(ebn0_db: f64, r_u: f64, p_u: f64) -> f64 {
    assert!(r_u > 0.0 && p_u > 0.0, "rate and power must be positive");
    p_u / (2.0 * r_u * 10f64.powf(ebn0_db / 10.0))
}

/// Inverse of [`ebn0_to_noise_var`].
pub fn noise_var_to_ebn0(noise_var: f64, r_u: f64, p_u: f64) -> f64 {
    10.0 * (p_u / (2.0 * r_u * noise_var)).log10()
}

/// How fresh channels and noise are drawn for the coded link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    /// Real `N(0,1)` channel entries, real `N(0, noise_var)` noise.
    RealIid,
    /// Complex `CN(0,1)` entries, complex `CN(0, noise_var)` noise.
    ComplexIid,
}

/// Monte Carlo sweep configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Code ensemble shared by all users.
    pub ensemble: CodeEnsemble,
    pub n_users: usize,
    pub n_rx: usize,
    /// Grid of Eb/N0 points, ascending, in dB.
    pub ebn0_grid_db: Vec<f64>,
    /// Detector/decoder alternations per block.
    pub max_outer: usize,
    /// Sum-product iterations per decoder activation.
    pub max_inner: usize,
    /// Block budget per grid point.
    pub max_blocks: usize,
    /// Stop a grid point early once this many bit errors have accumulated.
    pub min_bit_errors: usize,
    pub seed: u64,
    pub channel_model: ChannelModel,
    /// When set, every block reuses this channel instead of a fresh draw.
    pub fixed_channel: Option<CMatrix>,
}

impl SimConfig {
    pub fn new(ensemble: CodeEnsemble, n_users: usize, n_rx: usize, ebn0_grid_db: Vec<f64>) -> Self {
        Self {
            ensemble,
            n_users,
            n_rx,
            ebn0_grid_db,
            max_outer: 60,
            max_inner: 250,
            max_blocks: 100,
            min_bit_errors: 200,
            seed: 1,
            channel_model: ChannelModel::RealIid,
            fixed_channel: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_rx == 0 {
            return Err(Error::Invalid("user and antenna counts must be positive".into()));
        }
        if self.ebn0_grid_db.is_empty() {
            return Err(Error::Invalid("Eb/N0 grid must be nonempty".into()));
        }
        if self.ebn0_grid_db.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invalid("Eb/N0 grid must be sorted ascending".into()));
        }
        if self.max_blocks == 0 {
            return Err(Error::Invalid("at least one block per point is required".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Invalid("iteration caps must be positive".into()));
        }
        if let Some(h) = &self.fixed_channel {
            if h.nrows() != self.n_rx || h.ncols() != self.n_users {
                return Err(Error::Dimension("fixed channel has wrong shape".into()));
            }
        }
        Ok(())
    }
}

/// One measured point of a BER curve.
#[derive(Debug, Clone)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub block_errors: u64,
    pub blocks: u64,
}

/// A full sweep result.
#[derive(Debug, Clone)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
}

/// Result of one iterative-receiver run.
#[derive(Debug, Clone)]
pub struct ReceiverOutput {
    /// Hard information-bit decisions per user.
    pub decoded: Vec<Vec<u8>>,
    /// Per-user decoder success (zero syndrome reached).
    pub converged: Vec<bool>,
    /// Detector/decoder alternations spent.
    pub outer_iterations: usize,
}

/// Joint detection and decoding of one received block.
///
/// The first alternation uses the no-feedback prior (zero means, unit
/// variances); afterwards each decoder returns extrinsic soft symbols
/// `tanh(L/2)` and their variance, which are interleaved back into detector
/// priors. Messages in both directions are extrinsic only. Users whose
/// syndrome closes are frozen with hard `+-1` feedback.
pub fn iterative_receiver(
    hp: &CMatrix,
    noise_var: f64,
    y: &CMatrix,
    graphs: &[CodeGraph],
    interleavers: &[Interleaver],
    max_outer: usize,
    max_inner: usize,
    model: ChannelModel,
) -> Result<ReceiverOutput> {
    let n_users = hp.ncols();
    if graphs.len() != n_users || interleavers.len() != n_users {
        return Err(Error::Dimension("one graph and interleaver per user".into()));
    }
    let n = graphs[0].n;
    if graphs.iter().any(|g| g.n != n) || interleavers.iter().any(|il| il.len() != n) {
        return Err(Error::Dimension("all users must share the codeword length".into()));
    }
    if y.nrows() != hp.nrows() || y.ncols() != n {
        return Err(Error::Dimension("observation shape disagrees with channel/code".into()));
    }

    // real-part noise variance of the extrinsic observation is ve (real
    // model) or ve/2 (complex model); LLR = 2 re(u) / re_noise_var
    let re_scale = match model {
        ChannelModel::RealIid => 2.0,
        ChannelModel::ComplexIid => 4.0,
    };

    let mut prior = PriorState::uninformative(n_users, n);
    let mut decoded: Vec<Vec<u8>> = vec![Vec::new(); n_users];
    let mut converged = vec![false; n_users];
    let mut outer_used = 0;

    for outer in 0..max_outer {
        outer_used = outer + 1;
        let phis = phi_transfer(hp, noise_var, &prior.variances);
        let post = crate::detector::lmmse_posterior(hp, noise_var, y, &prior)?;
        // extrinsic means in the cancellation-free form
        // u = xhat + (xhat - xbar) / (phi * vbar)
        let mut new_means = prior.means.clone();
        let mut new_vars = prior.variances.clone();
        let results: Vec<(usize, Vec<f64>, f64, Option<Vec<u8>>, Vec<u8>)> = (0..n_users)
            .into_par_iter()
            .filter(|&i| !converged[i])
            .map(|i| {
                let phi = phis[i];
                let vbar = clamp_variance(prior.variances[i]);
                let mut llrs = vec![0.0f64; n];
                if phi > 0.0 {
                    let ve = 1.0 / phi;
                    let scale = 1.0 / (phi * vbar);
                    for t in 0..n {
                        let u = post.means[(i, t)]
                            + (post.means[(i, t)] - prior.means[(i, t)])
                                * Complex64::new(scale, 0.0);
                        llrs[t] = re_scale * u.re / ve;
                    }
                }
                let deint = interleavers[i].deinterleave(&llrs);
                let out = app_decode(&graphs[i], &deint, max_inner).expect("length matches");
                let v = extrinsic_variance(&out.extrinsic);
                let soft: Vec<f64> =
                    out.extrinsic.iter().map(|&l| (0.5 * l.clamp(-60.0, 60.0)).tanh()).collect();
                let re_soft = interleavers[i].interleave(&soft);
                let hard = if out.converged { Some(out.hard_info.clone()) } else { None };
                (i, re_soft, v, hard, out.hard_info)
            })
            .collect();
        let mut all_done = true;
        for (i, soft, v, hard, latest) in results {
            decoded[i] = latest;
            match hard {
                Some(info) => {
                    converged[i] = true;
                    // freeze hard feedback: re-encode and map to +-1
                    let cw = encode(&graphs[i], &info)?;
                    let symbols: Vec<f64> = cw.iter().map(|&b| 1.0 - 2.0 * b as f64).collect();
                    let re_sym = interleavers[i].interleave(&symbols);
                    for t in 0..n {
                        new_means[(i, t)] = Complex64::new(re_sym[t], 0.0);
                    }
                    new_vars[i] = VAR_FLOOR;
                    decoded[i] = cw[..graphs[i].k].to_vec();
                }
                None => {
                    all_done = false;
                    for t in 0..n {
                        new_means[(i, t)] = Complex64::new(soft[t], 0.0);
                    }
                    new_vars[i] = clamp_variance(v);
                }
            }
        }
        prior = PriorState { means: new_means, variances: new_vars };
        if all_done {
            break;
        }
    }
    Ok(ReceiverOutput { decoded, converged, outer_iterations: outer_used })
}

struct TrialResult {
    bit_errors: u64,
    bits: u64,
    block_error: bool,
}

fn run_trial(
    cfg: &SimConfig,
    graphs: &[CodeGraph],
    interleavers: &[Interleaver],
    noise_var: f64,
    trial_seed: u64,
) -> TrialResult {
    let (nu, nr) = (cfg.n_users, cfg.n_rx);
    let n = graphs[0].n;
    let k = graphs[0].k;
    let hp = match &cfg.fixed_channel {
        Some(h) => h.clone(),
        None => match cfg.channel_model {
            ChannelModel::RealIid => sample_iid_real_channel(nr, nu, derive_seed(trial_seed, 1)),
            ChannelModel::ComplexIid => {
                sample_iid_gaussian_channel(nr, nu, derive_seed(trial_seed, 1))
            }
        },
    };
    let mut rng = rng_from_seed(derive_seed(trial_seed, 2));
    let mut info = vec![vec![0u8; k]; nu];
    let mut x = CMatrix::zeros(nu, n);
    for i in 0..nu {
        for b in info[i].iter_mut() {
            *b = rng.gen_range(0..2u8);
        }
        let cw = encode(&graphs[i], &info[i]).expect("matching length");
        let symbols: Vec<f64> = cw.iter().map(|&b| 1.0 - 2.0 * b as f64).collect();
        let tx = interleavers[i].interleave(&symbols);
        for t in 0..n {
            x[(i, t)] = Complex64::new(tx[t], 0.0);
        }
    }
    let mut y = &hp * &x;
    match cfg.channel_model {
        ChannelModel::RealIid => {
            let s = noise_var.sqrt();
            for v in y.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += Complex64::new(z * s, 0.0);
            }
        }
        ChannelModel::ComplexIid => {
            let s = (noise_var * 0.5).sqrt();
            for v in y.iter_mut() {
                let zr: f64 = StandardNormal.sample(&mut rng);
                let zi: f64 = StandardNormal.sample(&mut rng);
                *v += Complex64::new(zr * s, zi * s);
            }
        }
    }
    let out = iterative_receiver(
        &hp,
        noise_var,
        &y,
        graphs,
        interleavers,
        cfg.max_outer,
        cfg.max_inner,
        cfg.channel_model,
    )
    .expect("shapes are consistent by construction");
    let mut bit_errors = 0u64;
    for i in 0..nu {
        bit_errors += out.decoded[i]
            .iter()
            .zip(&info[i])
            .filter(|(a, b)| a != b)
            .count() as u64;
    }
    TrialResult { bit_errors, bits: (nu * k) as u64, block_error: bit_errors > 0 }
}

/// Monte Carlo BER sweep over the configured Eb/N0 grid.
///
/// Blocks run in deterministic seeded batches; a grid point stops once the
/// error budget or the block budget is reached. Identical configurations
/// produce identical curves regardless of thread count.
pub fn ber_sweep(cfg: &SimConfig) -> Result<BerCurve> {
    cfg.validate()?;
    let nu = cfg.n_users;
    let graphs: Vec<CodeGraph> = (0..nu)
        .map(|i| build_code(&cfg.ensemble, derive_seed(cfg.seed, 10_000 + i as u64)))
        .collect::<Result<_>>()?;
    let n = graphs[0].n;
    let interleavers: Vec<Interleaver> = (0..nu)
        .map(|i| Interleaver::new(n, derive_seed(cfg.seed, 20_000 + i as u64)))
        .collect();

    let mut points = Vec::with_capacity(cfg.ebn0_grid_db.len());
    for (pi, &ebn0) in cfg.ebn0_grid_db.iter().enumerate() {
        let noise_var = ebn0_to_noise_var(ebn0, cfg.ensemble.rate_u, 1.0);
        let mut bit_errors = 0u64;
        let mut bits = 0u64;
        let mut block_errors = 0u64;
        let mut blocks = 0u64;
        let batch = rayon::current_num_threads().max(4);
        let mut next_trial = 0usize;
        while (blocks as usize) < cfg.max_blocks && (bit_errors as usize) < cfg.min_bit_errors {
            let upper = (next_trial + batch).min(cfg.max_blocks);
            let results: Vec<TrialResult> = (next_trial..upper)
                .into_par_iter()
                .map(|trial| {
                    let trial_seed =
                        derive_seed(cfg.seed, (pi as u64) << 32 | (trial as u64 + 1));
                    run_trial(cfg, &graphs, &interleavers, noise_var, trial_seed)
                })
                .collect();
            for r in results {
                bit_errors += r.bit_errors;
                bits += r.bits;
                block_errors += r.block_error as u64;
                blocks += 1;
            }
            next_trial = upper;
        }
        points.push(BerPoint {
            ebn0_db: ebn0,
            bit_errors,
            bits,
            ber: bit_errors as f64 / bits as f64,
            block_errors,
            blocks,
        });
    }
    Ok(BerCurve { points })
}
