//! Numeric search for the transfer-constraint weights that realize a target
//! rate split.
//!
//! Coordinate descent over `log gamma_i`: each coordinate is solved by
//! bisection (the rate is monotone in its own weight), a candidate that
//! worsens the L1 rate error is damped toward the previous value, and targets
//! that cannot sit on the dominant face are first projected onto it. Hitting
//! the sweep cap backs every target rate off by `delta` and retries.

use crate::capacity::{in_region, project_to_dominant_face, sum_capacity, RatePoint};
use crate::linalg::CMatrix;
use crate::rates::{user_rates_closed_form, GammaVector};
use crate::{Error, Result};

/// Controls for [`find_gamma`].
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// L1 tolerance on the achieved rate vector.
    pub eps: f64,
    /// Rate back-off applied to every target when the sweep budget runs out.
    pub delta: f64,
    /// Outer sweep cap per back-off round.
    pub n_max: usize,
    /// Bisection bracket for each coordinate weight.
    pub gamma_bounds: (f64, f64),
    /// Back-off rounds allowed before giving up.
    pub max_backoffs: usize,
    /// Seed for a random (log-uniform) initial weight vector; `None` starts
    /// from all ones, which is deterministic and usually just as good.
    pub random_init_seed: Option<u64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            delta: 1e-2,
            n_max: 50,
            gamma_bounds: (1e-9, 1e9),
            max_backoffs: 5,
            random_init_seed: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !(self.delta > 0.0) {
            return Err(Error::Invalid("eps and delta must be positive".into()));
        }
        if !(self.gamma_bounds.0 > 0.0 && self.gamma_bounds.1 > self.gamma_bounds.0) {
            return Err(Error::Invalid("gamma bounds must satisfy 0 < lo < hi".into()));
        }
        if self.n_max == 0 {
            return Err(Error::Invalid("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// One outer-sweep record of the convergence trace.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub sweep: usize,
    pub l1_error: f64,
}

/// Outcome of [`find_gamma`].
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub gamma: GammaVector,
    pub achieved: RatePoint,
    /// Total outer sweeps spent (across back-off rounds).
    pub iterations: usize,
    pub converged: bool,
    /// The target actually pursued, after projection and/or back-off.
    pub adjusted_target: RatePoint,
    pub trace: Vec<TraceEntry>,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn rates_with(hp: &CMatrix, noise_var: f64, raw: &[f64]) -> Vec<f64> {
    let gamma = GammaVector::new(raw.to_vec()).expect("positive weights");
    user_rates_closed_form(hp, noise_var, &gamma)
}

/// Solves `R_i(gamma_i) = target_ri` by bisection over `log gamma_i` with the
/// other coordinates held fixed. Requires the target to be bracketed by the
/// rates at the two bounds (the rate is monotone increasing in `gamma_i`).
pub fn solve_gamma_i(
    hp: &CMatrix,
    noise_var: f64,
    gamma_others: &[f64],
    user: usize,
    target_ri: f64,
    bounds: (f64, f64),
    tol: f64,
) -> Result<f64> {
    let nu = hp.ncols();
    if gamma_others.len() != nu || user >= nu {
        return Err(Error::Invalid("weight vector length or user index invalid".into()));
    }
    let eval = |g: f64| {
        let mut raw = gamma_others.to_vec();
        raw[user] = g;
        rates_with(hp, noise_var, &raw)[user]
    };
    // fixed point shortcut
    let current = gamma_others[user];
    if (eval(current) - target_ri).abs() <= tol {
        return Ok(current);
    }
    let (lo, hi) = bounds;
    let (flo, fhi) = (eval(lo), eval(hi));
    if !(flo - target_ri <= 0.0 && fhi - target_ri >= 0.0) {
        return Err(Error::NoBracket { lo, hi, flo, fhi });
    }
    let (mut llo, mut lhi) = (lo.ln(), hi.ln());
    let mut mid = 0.5 * (llo + lhi);
    for _ in 0..200 {
        mid = 0.5 * (llo + lhi);
        let r = eval(mid.exp());
        if (r - target_ri).abs() <= tol {
            return Ok(mid.exp());
        }
        if r < target_ri {
            llo = mid;
        } else {
            lhi = mid;
        }
    }
    Ok(mid.exp())
}

/// Numeric search for the full weight vector achieving a target rate point.
pub fn find_gamma(
    hp: &CMatrix,
    noise_var: f64,
    target: &RatePoint,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    cfg.validate()?;
    let nu = hp.ncols();
    if target.len() != nu {
        return Err(Error::Dimension(format!("{} targets for {} users", target.len(), nu)));
    }
    let csum = sum_capacity(hp, noise_var);

    // project targets that are outside the region or off the dominant face
    let needs_projection = !in_region(hp, noise_var, target)?
        || (csum - target.sum()).abs() > 0.5 * cfg.eps;
    let mut adjusted: Vec<f64> = if needs_projection {
        project_to_dominant_face(hp, noise_var, target)?.0
    } else {
        target.0.clone()
    };

    let mut raw: Vec<f64> = match cfg.random_init_seed {
        None => vec![1.0; nu],
        Some(seed) => {
            use rand::Rng;
            let mut rng = crate::rng::rng_from_seed(seed);
            let (lo, hi) = cfg.gamma_bounds;
            (0..nu)
                .map(|_| (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp())
                .collect()
        }
    };

    let per_coord_tol = cfg.eps / (10.0 * nu as f64);
    let mut trace = Vec::new();
    let mut total_sweeps = 0usize;

    for backoff in 0..=cfg.max_backoffs {
        let mut rates = rates_with(hp, noise_var, &raw);
        let mut err = l1(&rates, &adjusted);
        for _sweep in 0..cfg.n_max {
            if err <= cfg.eps {
                break;
            }
            total_sweeps += 1;
            for i in 0..nu {
                let mut candidate = match solve_gamma_i(
                    hp,
                    noise_var,
                    &raw,
                    i,
                    adjusted[i],
                    cfg.gamma_bounds,
                    per_coord_tol,
                ) {
                    Ok(g) => g,
                    // bracket failure: move to the bound closest in rate and
                    // let later sweeps compensate through the other users
                    Err(Error::NoBracket { lo, hi, flo, fhi }) => {
                        if (flo - adjusted[i]).abs() <= (fhi - adjusted[i]).abs() {
                            lo
                        } else {
                            hi
                        }
                    }
                    Err(e) => return Err(e),
                };
                // damping: never accept a coordinate move that worsens L1
                let mut accepted = false;
                for _halving in 0..30 {
                    let mut trial = raw.clone();
                    trial[i] = candidate;
                    let trial_rates = rates_with(hp, noise_var, &trial);
                    let trial_err = l1(&trial_rates, &adjusted);
                    if trial_err <= err {
                        raw = trial;
                        rates = trial_rates;
                        err = trial_err;
                        accepted = true;
                        break;
                    }
                    candidate = 0.5 * (raw[i] + candidate);
                }
                let _ = accepted; // a stuck coordinate simply keeps its value
            }
            // the constraint is scale-invariant: re-pin gamma_1 = 1
            let g0 = raw[0];
            raw.iter_mut().for_each(|g| *g /= g0);
            trace.push(TraceEntry { sweep: total_sweeps, l1_error: err });
        }
        if err <= cfg.eps {
            return Ok(SearchResult {
                gamma: GammaVector::new(raw.clone())?,
                achieved: RatePoint(rates),
                iterations: total_sweeps,
                converged: true,
                adjusted_target: RatePoint(adjusted),
                trace,
            });
        }
        if backoff < cfg.max_backoffs {
            for t in adjusted.iter_mut() {
                *t = (*t - cfg.delta).max(0.0);
            }
        }
    }
    Err(Error::NonConvergence(format!(
        "gamma search missed the target after {} sweeps and {} back-offs \
         (last L1 error {:.3e})",
        total_sweeps,
        cfg.max_backoffs,
        trace.last().map_or(f64::NAN, |t| t.l1_error)
    )))
}
