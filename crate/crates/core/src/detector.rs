//! LMMSE multi-user detection: a-posteriori estimation, extrinsic messages,
//! SINR-variance transfer functions, and the MISO/SIMO special cases.
//!
//! Incoming per-user variances are clamped to `[VAR_FLOOR, 1]` before any
//! matrix work; values at the floor behave like near-perfect priors without
//! dividing by zero near convergence.

use crate::linalg::{cholesky, real_diag, CMatrix};
use crate::rng::rng_from_seed;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Lower clamp for a-priori variances.
pub const VAR_FLOOR: f64 = 1e-12;

/// Clamps an a-priori variance into `[VAR_FLOOR, 1]`.
pub fn clamp_variance(v: f64) -> f64 {
    v.clamp(VAR_FLOOR, 1.0)
}

/// A-priori knowledge fed to the detector: per-symbol means and per-user
/// variances (variances are time-invariant within a block).
#[derive(Debug, Clone)]
pub struct PriorState {
    /// `N_u x N` a-priori means.
    pub means: CMatrix,
    /// Per-user a-priori variances in `(0, 1]`.
    pub variances: Vec<f64>,
}

impl PriorState {
    pub fn new(means: CMatrix, variances: Vec<f64>) -> Result<Self> {
        if variances.len() != means.nrows() {
            return Err(Error::Dimension(format!(
                "{} variances for {} users",
                variances.len(),
                means.nrows()
            )));
        }
        if variances.iter().any(|v| !v.is_finite() || *v <= 0.0 || *v > 1.0) {
            return Err(Error::Invalid("prior variances must lie in (0, 1]".into()));
        }
        Ok(Self { means, variances })
    }

    /// The no-feedback prior: zero means, unit variances.
    pub fn uninformative(n_users: usize, block_len: usize) -> Self {
        Self { means: CMatrix::zeros(n_users, block_len), variances: vec![1.0; n_users] }
    }
}

/// Output of the a-posteriori LMMSE estimator.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    pub means: CMatrix,
    /// Diagonal of the posterior covariance.
    pub variances: Vec<f64>,
}

/// Extrinsic messages for the decoders: means plus per-user extrinsic SINRs.
#[derive(Debug, Clone)]
pub struct ExtrinsicState {
    pub means: CMatrix,
    /// `rho_i = 1/vpost_i - 1/vbar_i`; the extrinsic noise variance is `1/rho_i`.
    pub sinrs: Vec<f64>,
}

fn clamped(vars: &[f64]) -> Vec<f64> {
    vars.iter().map(|&v| clamp_variance(v)).collect()
}

/// A-posteriori LMMSE estimate of a symbol block.
///
/// `posterior mean = V (D^-1 xbar + H'^H y / noise_var)` with
/// `V = (H'^H H'/noise_var + D^-1)^-1`, `D = diag(prior variances)`.
/// When `N_r < N_u` the inverse is taken through the `N_r`-sized form
/// `V = D - D H'^H (noise_var I + H' D H'^H)^-1 H' D`.
pub fn lmmse_posterior(
    hp: &CMatrix,
    noise_var: f64,
    y: &CMatrix,
    prior: &PriorState,
) -> Result<PosteriorState> {
    let (nr, nu) = (hp.nrows(), hp.ncols());
    if prior.means.nrows() != nu || y.nrows() != nr || y.ncols() != prior.means.ncols() {
        return Err(Error::Dimension("posterior: channel/prior/observation shapes disagree".into()));
    }
    let d = clamped(&prior.variances);
    if nr < nu {
        lmmse_posterior_receive_form(hp, noise_var, y, &prior.means, &d)
    } else {
        lmmse_posterior_user_form(hp, noise_var, y, &prior.means, &d)
    }
}

fn lmmse_posterior_user_form(
    hp: &CMatrix,
    noise_var: f64,
    y: &CMatrix,
    xbar: &CMatrix,
    d: &[f64],
) -> Result<PosteriorState> {
    let nu = hp.ncols();
    let g = hp.adjoint() * hp / Complex64::new(noise_var, 0.0);
    let mut prec = g;
    for i in 0..nu {
        prec[(i, i)] += Complex64::new(1.0 / d[i], 0.0);
    }
    let chol = cholesky(&prec)
        .ok_or_else(|| Error::NonConvergence("posterior precision not positive definite".into()))?;
    // rhs = D^-1 xbar + H'^H y / noise_var
    let mut rhs = hp.adjoint() * y / Complex64::new(noise_var, 0.0);
    for i in 0..nu {
        let scale = Complex64::new(1.0 / d[i], 0.0);
        for t in 0..rhs.ncols() {
            rhs[(i, t)] += scale * xbar[(i, t)];
        }
    }
    let means = chol.solve(&rhs);
    let cov = chol.inverse();
    Ok(PosteriorState { means, variances: real_diag(&cov) })
}

fn lmmse_posterior_receive_form(
    hp: &CMatrix,
    noise_var: f64,
    y: &CMatrix,
    xbar: &CMatrix,
    d: &[f64],
) -> Result<PosteriorState> {
    let (nr, nu) = (hp.nrows(), hp.ncols());
    // S = noise_var I + H' D H'^H  (N_r sized)
    let mut hd = hp.clone();
    for j in 0..nu {
        hd.column_mut(j).scale_mut(d[j]);
    }
    let mut s = &hd * hp.adjoint();
    for i in 0..nr {
        s[(i, i)] += Complex64::new(noise_var, 0.0);
    }
    let chol = cholesky(&s)
        .ok_or_else(|| Error::NonConvergence("receive-form covariance not positive definite".into()))?;
    // means: xbar + D H'^H S^-1 (y - H' xbar)
    let resid = y - hp * xbar;
    let w = chol.solve(&resid);
    let mut means = hd.adjoint() * w;
    means += xbar;
    // variances: d_i - d_i^2 [H'^H S^-1 H']_{ii}
    let hs = chol.solve(hp);
    let mut variances = Vec::with_capacity(nu);
    for i in 0..nu {
        let q: Complex64 = hp.column(i).adjoint() * hs.column(i);
        variances.push(d[i] - d[i] * d[i] * q.re);
    }
    Ok(PosteriorState { means, variances })
}

/// Removes the prior message from the a-posteriori estimate:
/// `rho_i = 1/vpost_i - 1/vbar_i`,
/// `u = xhat/(rho_i vpost_i) - xbar/(rho_i vbar_i)`.
pub fn lmmse_extrinsic(posterior: &PosteriorState, prior: &PriorState) -> Result<ExtrinsicState> {
    let nu = posterior.variances.len();
    if prior.variances.len() != nu {
        return Err(Error::Dimension("extrinsic: prior/posterior user counts disagree".into()));
    }
    let vbar = clamped(&prior.variances);
    let mut sinrs = Vec::with_capacity(nu);
    for i in 0..nu {
        let phi = 1.0 / posterior.variances[i] - 1.0 / vbar[i];
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(Error::NoExtrinsic { user: i });
        }
        sinrs.push(phi);
    }
    let n = posterior.means.ncols();
    let mut means = CMatrix::zeros(nu, n);
    for i in 0..nu {
        let a = Complex64::new(1.0 / (sinrs[i] * posterior.variances[i]), 0.0);
        let b = Complex64::new(1.0 / (sinrs[i] * vbar[i]), 0.0);
        for t in 0..n {
            means[(i, t)] = a * posterior.means[(i, t)] - b * prior.means[(i, t)];
        }
    }
    Ok(ExtrinsicState { means, sinrs })
}

/// Extrinsic SINR-variance transfer `phi_i(vbar)` from variances alone.
///
/// Computed through `T = (I + B)^-1 B` with `B = D^{1/2} (H'^H H'/noise_var)
/// D^{1/2}`, which stays accurate as variances approach the floor. A zero
/// channel column yields `phi_i = 0` (no information) instead of an error.
pub fn phi_transfer(hp: &CMatrix, noise_var: f64, vbar: &[f64]) -> Vec<f64> {
    let nu = hp.ncols();
    assert_eq!(vbar.len(), nu, "one variance per user");
    let d = clamped(vbar);
    let g = hp.adjoint() * hp / Complex64::new(noise_var, 0.0);
    let mut b = g;
    for i in 0..nu {
        for j in 0..nu {
            b[(i, j)] *= Complex64::new((d[i] * d[j]).sqrt(), 0.0);
        }
    }
    let mut eye_b = b.clone();
    for i in 0..nu {
        eye_b[(i, i)] += Complex64::new(1.0, 0.0);
    }
    let chol = cholesky(&eye_b).expect("I + B is positive definite");
    let t = chol.solve(&b);
    (0..nu)
        .map(|i| {
            let tii = t[(i, i)].re.clamp(0.0, 1.0 - 1e-15);
            tii / (d[i] * (1.0 - tii))
        })
        .collect()
}

/// Diagonal of the posterior covariance from variances alone; shares the
/// stable route of [`phi_transfer`].
pub fn posterior_variances(hp: &CMatrix, noise_var: f64, vbar: &[f64]) -> Vec<f64> {
    let phis = phi_transfer(hp, noise_var, vbar);
    let d = clamped(vbar);
    phis.iter().zip(&d).map(|(&phi, &v)| 1.0 / (phi + 1.0 / v)).collect()
}

/// Symmetric-case transfer: all users share power `w^2` and variance `v`;
/// `rho = [Tr{(w^2 H^H H / noise_var + I/v)^-1} / N_u]^-1 - 1/v`.
pub fn symmetric_phi(h: &CMatrix, w: f64, noise_var: f64, v: f64) -> f64 {
    let nu = h.ncols();
    let v = clamp_variance(v);
    let mut m = h.adjoint() * h * Complex64::new(w * w / noise_var, 0.0);
    for i in 0..nu {
        m[(i, i)] += Complex64::new(1.0 / v, 0.0);
    }
    let chol = cholesky(&m).expect("symmetric precision is positive definite");
    let inv = chol.inverse();
    let tr: f64 = real_diag(&inv).iter().sum();
    let mmse = tr / nu as f64;
    1.0 / mmse - 1.0 / v
}

/// Elementary signal estimator for a single receive antenna (`N_r = 1`),
/// algebraically identical to the general LMMSE extrinsic on that domain:
/// `u_t = Lambda^-1 (h'^H y_t - Omega xbar_t)` with `Lambda`/`Omega` the
/// diagonal/off-diagonal split of `h'^H h'`, and
/// `rho_i = |h'_i|^2 / (sum_{k != i} |h'_k|^2 v_k + noise_var)`.
pub fn miso_ese(
    hp: &CMatrix,
    noise_var: f64,
    y: &CMatrix,
    prior: &PriorState,
) -> Result<ExtrinsicState> {
    if hp.nrows() != 1 {
        return Err(Error::Invalid(format!("MISO estimator requires N_r = 1, got {}", hp.nrows())));
    }
    let nu = hp.ncols();
    if prior.means.nrows() != nu || y.nrows() != 1 || y.ncols() != prior.means.ncols() {
        return Err(Error::Dimension("MISO: shapes disagree".into()));
    }
    let v = clamped(&prior.variances);
    let gains: Vec<f64> = (0..nu).map(|i| hp[(0, i)].norm_sqr()).collect();
    let total_interf: f64 = gains.iter().zip(&v).map(|(g, vv)| g * vv).sum();
    let n = y.ncols();
    let mut means = CMatrix::zeros(nu, n);
    let mut sinrs = Vec::with_capacity(nu);
    for i in 0..nu {
        if gains[i] == 0.0 {
            sinrs.push(0.0);
            for t in 0..n {
                means[(i, t)] = prior.means[(i, t)];
            }
            continue;
        }
        sinrs.push(gains[i] / (total_interf - gains[i] * v[i] + noise_var));
        let hi_conj = hp[(0, i)].conj();
        for t in 0..n {
            // h_i^H y_t minus the interference reconstruction for all k != i
            let mut acc = hi_conj * y[(0, t)];
            for k in 0..nu {
                if k != i {
                    acc -= hi_conj * hp[(0, k)] * prior.means[(k, t)];
                }
            }
            means[(i, t)] = acc / gains[i];
        }
    }
    Ok(ExtrinsicState { means, sinrs })
}

/// Maximal ratio combining for a single user (`N_u = 1`):
/// `u_t = h'^H y_t / ||h'||^2`, extrinsic variance `noise_var / ||h'||^2`.
pub fn simo_mrc(hp: &CMatrix, noise_var: f64, y: &CMatrix) -> Result<(CMatrix, f64)> {
    if hp.ncols() != 1 {
        return Err(Error::Invalid(format!("MRC requires N_u = 1, got {}", hp.ncols())));
    }
    let norm2 = hp.column(0).norm_squared();
    if norm2 == 0.0 {
        return Err(Error::Invalid("MRC: zero channel vector".into()));
    }
    if y.nrows() != hp.nrows() {
        return Err(Error::Dimension("MRC: observation rows disagree with channel".into()));
    }
    let u = hp.adjoint() * y / Complex64::new(norm2, 0.0);
    Ok((u, noise_var / norm2))
}

/// How the probe draws the joint (symbol, prior-mean) population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorModel {
    /// Jointly Gaussian symbols and priors (the LMMSE working assumption).
    Gaussian,
    /// Real BPSK symbols with consistent soft priors (model mismatch case).
    Bpsk,
}

/// Per-user empirical diagnostics of the extrinsic residual `u_i - x_i`.
#[derive(Debug, Clone)]
pub struct GaussianityReport {
    /// Empirical residual variance per user.
    pub empirical_variance: Vec<f64>,
    /// Predicted `1/phi_i` per user.
    pub predicted_variance: Vec<f64>,
    /// Excess kurtosis of the complex residual (`E|z|^4 / (E|z|^2)^2 - 2`).
    pub excess_kurtosis: Vec<f64>,
    /// |empirical correlation| between residual and transmitted symbol.
    pub residual_symbol_correlation: Vec<f64>,
}

/// Simulates one detection pass with prescribed prior variances and measures
/// the extrinsic residual statistics against the AWGN-equivalence prediction.
pub fn gaussianity_probe(
    hp: &CMatrix,
    noise_var: f64,
    vbar: &[f64],
    n_samples: usize,
    model: PriorModel,
    seed: u64,
) -> Result<GaussianityReport> {
    let (nr, nu) = (hp.nrows(), hp.ncols());
    if vbar.len() != nu {
        return Err(Error::Dimension("one prior variance per user".into()));
    }
    if n_samples < 10_000 {
        return Err(Error::Invalid("probe needs at least 10^4 samples".into()));
    }
    let v = clamped(vbar);
    let mut rng = rng_from_seed(seed);
    let mut cn = |var: f64, rng: &mut rand_chacha::ChaCha12Rng| {
        let s = (var * 0.5).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, im * s)
    };

    let mut x = CMatrix::zeros(nu, n_samples);
    let mut xbar = CMatrix::zeros(nu, n_samples);
    for i in 0..nu {
        for t in 0..n_samples {
            match model {
                PriorModel::Gaussian => {
                    // xbar ~ CN(0, 1 - v), x = xbar + e, e ~ CN(0, v)
                    let m = cn(1.0 - v[i], &mut rng);
                    x[(i, t)] = m + cn(v[i], &mut rng);
                    xbar[(i, t)] = m;
                }
                PriorModel::Bpsk => {
                    let s: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    let c = (v[i] * (1.0 - v[i])).sqrt();
                    x[(i, t)] = Complex64::new(s, 0.0);
                    xbar[(i, t)] = Complex64::new((1.0 - v[i]) * s, 0.0) + cn(1.0, &mut rng) * c;
                }
            }
        }
    }
    let mut y = hp * &x;
    for t in 0..n_samples {
        for r in 0..nr {
            y[(r, t)] += cn(noise_var, &mut rng);
        }
    }
    let prior = PriorState { means: xbar, variances: v.clone() };
    let post = lmmse_posterior(hp, noise_var, &y, &prior)?;
    let ext = lmmse_extrinsic(&post, &prior)?;

    let mut report = GaussianityReport {
        empirical_variance: Vec::with_capacity(nu),
        predicted_variance: ext.sinrs.iter().map(|&p| 1.0 / p).collect(),
        excess_kurtosis: Vec::with_capacity(nu),
        residual_symbol_correlation: Vec::with_capacity(nu),
    };
    let nf = n_samples as f64;
    for i in 0..nu {
        let mut m2 = 0.0;
        let mut m4 = 0.0;
        let mut cross = Complex64::new(0.0, 0.0);
        for t in 0..n_samples {
            let z = ext.means[(i, t)] - x[(i, t)];
            let a2 = z.norm_sqr();
            m2 += a2;
            m4 += a2 * a2;
            cross += z * x[(i, t)].conj();
        }
        m2 /= nf;
        m4 /= nf;
        report.empirical_variance.push(m2);
        report.excess_kurtosis.push(m4 / (m2 * m2) - 2.0);
        report.residual_symbol_correlation.push(cross.norm() / nf / m2.sqrt());
    }
    Ok(report)
}
