//! Transfer-constrained achievable rates of iterative LMMSE detection.
//!
//! All users' a-priori variances are tied to a single scalar track through
//! the constraint `gamma_i (1/v_i - 1) = gamma_j (1/v_j - 1)`; the weight
//! vector `gamma` steers how the sum capacity splits across users. Rates are
//! computed two independent ways: a quadrature of the variance-track integral
//! (in the substituted variable `s = 1/v_1`, with an analytic tail beyond
//! `s_max`) and a closed form through the eigendecomposition of
//! `B = diag(sqrt(gamma)) (H'^H H'/noise_var + I) diag(sqrt(gamma))`.

use crate::capacity::RatePoint;
use crate::detector::clamp_variance;
use crate::linalg::{cholesky, hermitian_eigen, real_diag, CMatrix};
use crate::quad::integrate_vec;
use crate::{Error, Result};
use num_complex::Complex64;

const LN_2: f64 = std::f64::consts::LN_2;

/// Per-user transfer-constraint weights, normalized so the first entry is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaVector(Vec<f64>);

impl GammaVector {
    /// Builds a weight vector from strictly positive entries; the stored
    /// vector is rescaled so `gamma[0] = 1` (the constraint is invariant to
    /// common scaling).
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::Invalid("gamma vector must be nonempty".into()));
        }
        if gammas.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::Invalid("gamma entries must be finite and positive".into()));
        }
        let g0 = gammas[0];
        Ok(Self(gammas.into_iter().map(|g| g / g0).collect()))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Quadrature controls for the variance-track rate integral.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the integral (nats).
    pub abs_tol: f64,
    /// Upper integration limit in `s = 1/v_1`; the remainder is covered by
    /// the analytic tail expansion.
    pub s_max: f64,
    /// Segment budget before the integrator gives up.
    pub max_segments: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-8, s_max: 1e6, max_segments: 20_000 }
    }
}

/// Variances induced on every user by track position `v1` of user 0:
/// `v_i = 1 / (1 + (1/v1 - 1)/gamma_i)`.
pub fn track_variances(gamma: &GammaVector, v1: f64) -> Result<Vec<f64>> {
    if !(v1 > 0.0 && v1 <= 1.0) {
        return Err(Error::Invalid(format!("v1 = {v1} outside (0, 1]")));
    }
    let slope = 1.0 / v1 - 1.0;
    Ok(gamma.as_slice().iter().map(|&g| 1.0 / (1.0 + slope / g)).collect())
}

/// `B = G^{1/2}-weighted precision`: `diag(sqrt(g)) (H'^H H'/nv + I) diag(sqrt(g))`.
fn weighted_precision(hp: &CMatrix, noise_var: f64, gamma: &GammaVector) -> CMatrix {
    let nu = hp.ncols();
    let mut m = hp.adjoint() * hp / Complex64::new(noise_var, 0.0);
    for i in 0..nu {
        m[(i, i)] += Complex64::new(1.0, 0.0);
    }
    let g = gamma.as_slice();
    for i in 0..nu {
        for j in 0..nu {
            m[(i, j)] *= Complex64::new((g[i] * g[j]).sqrt(), 0.0);
        }
    }
    m
}

/// Diagonal of `(B + (s-1) I)^-1` for `s = 1/v1`.
fn shifted_inverse_diag(b: &CMatrix, s: f64) -> Vec<f64> {
    let n = b.nrows();
    let mut m = b.clone();
    for i in 0..n {
        m[(i, i)] += Complex64::new(s - 1.0, 0.0);
    }
    let chol = cholesky(&m).expect("B + (s-1)I is positive definite for s >= 1");
    real_diag(&chol.inverse())
}

/// Diagonal of the track-constrained posterior covariance
/// `(H'^H H'/nv + I + (1/v1 - 1) diag(gamma)^-1)^-1`.
pub fn posterior_cov_on_track(
    hp: &CMatrix,
    noise_var: f64,
    gamma: &GammaVector,
    v1: f64,
) -> Result<Vec<f64>> {
    if !(v1 > 0.0 && v1 <= 1.0) {
        return Err(Error::Invalid(format!("v1 = {v1} outside (0, 1]")));
    }
    let b = weighted_precision(hp, noise_var, gamma);
    let inv = shifted_inverse_diag(&b, 1.0 / v1);
    Ok(inv.iter().zip(gamma.as_slice()).map(|(&d, &g)| g * d).collect())
}

/// All user rates by adaptive quadrature of the variance-track integral.
///
/// In bits: `R_i = [ int_1^inf (1/s - [(B+(s-1)I)^-1]_ii) ds ] / ln 2 - log2 gamma_i`.
/// The integrand decays as `O(1/s^2)`; beyond `s_max` the expansion
/// `1/s - 1/(s-1) + B_ii/(s-1)^2 - (B^2)_ii/(s-1)^3` integrates in closed form.
pub fn user_rates_numeric(
    hp: &CMatrix,
    noise_var: f64,
    gamma: &GammaVector,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let nu = hp.ncols();
    if gamma.len() != nu {
        return Err(Error::Dimension(format!("{} gammas for {} users", gamma.len(), nu)));
    }
    let b = weighted_precision(hp, noise_var, gamma);
    let s_max = spec.s_max.max(16.0);
    // log-spaced seed intervals: curvature concentrates near s = 1
    let mut splits = Vec::new();
    let mut s = 2.0;
    while s < s_max {
        splits.push(s);
        s *= 4.0;
    }
    let integral = integrate_vec(
        |s| {
            let diag = shifted_inverse_diag(&b, s);
            diag.into_iter().map(|d| 1.0 / s - d).collect()
        },
        1.0,
        s_max,
        spec.abs_tol,
        &splits,
        spec.max_segments,
    )
    .map_err(|e| {
        Error::NonConvergence(format!("rate integral did not meet tolerance: {e}"))
    })?;

    let b2 = &b * &b;
    let g = gamma.as_slice();
    let mut rates = Vec::with_capacity(nu);
    for i in 0..nu {
        let tail = (1.0 - 1.0 / s_max).ln() + b[(i, i)].re / (s_max - 1.0)
            - b2[(i, i)].re / (2.0 * (s_max - 1.0) * (s_max - 1.0));
        rates.push((integral[i] + tail) / LN_2 - g[i].log2());
    }
    Ok(rates)
}

/// Rate of a single user by quadrature; see [`user_rates_numeric`].
pub fn user_rate_numeric(
    hp: &CMatrix,
    noise_var: f64,
    gamma: &GammaVector,
    user: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if user >= hp.ncols() {
        return Err(Error::Invalid(format!("user index {user} out of range")));
    }
    Ok(user_rates_numeric(hp, noise_var, gamma, spec)?[user])
}

/// All user rates in closed form through the eigendecomposition of `B`:
/// `R_i = sum_j |Q_ij|^2 log2 w_j - log2 gamma_i` with `B = Q diag(w) Q^H`.
pub fn user_rates_closed_form(hp: &CMatrix, noise_var: f64, gamma: &GammaVector) -> Vec<f64> {
    let nu = hp.ncols();
    assert_eq!(gamma.len(), nu, "one gamma per user");
    let b = weighted_precision(hp, noise_var, gamma);
    let (w, q) = hermitian_eigen(&b);
    let g = gamma.as_slice();
    (0..nu)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..nu {
                acc += q[(i, j)].norm_sqr() * w[j].log2();
            }
            acc - g[i].log2()
        })
        .collect()
}

/// Closed-form rate of a single user; see [`user_rates_closed_form`].
pub fn user_rate_closed_form(hp: &CMatrix, noise_var: f64, gamma: &GammaVector, user: usize) -> f64 {
    user_rates_closed_form(hp, noise_var, gamma)[user]
}

/// Two-user rates in closed form for `gamma = (1, gamma2)`.
///
/// With `A = H'^H H'/noise_var + I` and
/// `eta = sqrt(a22^2 g^2 + 2 (2|a12|^2 - a11 a22) g + a11^2)`:
/// `R1 = log2(g |A|)/2 + (a22 g - a11)/(2 eta) * log2((a22 g + a11 - eta)/(a22 g + a11 + eta))`
/// and `R2` mirrors it with a `-eta` numerator as well, so `R1 + R2 = log2 |A|`
/// holds identically. The difference quotient is evaluated through
/// `a22 g + a11 - eta = 4 g |A| / (a22 g + a11 + eta)`, which is exact and
/// avoids cancellation for extreme `g`.
pub fn two_user_rates_closed(hp: &CMatrix, noise_var: f64, gamma2: f64) -> Result<(f64, f64)> {
    if hp.ncols() != 2 {
        return Err(Error::Invalid(format!(
            "two-user closed form requires N_u = 2, got {}",
            hp.ncols()
        )));
    }
    if !(gamma2 > 0.0 && gamma2.is_finite()) {
        return Err(Error::Invalid("gamma2 must be finite and positive".into()));
    }
    let mut a = hp.adjoint() * hp / Complex64::new(noise_var, 0.0);
    a[(0, 0)] += Complex64::new(1.0, 0.0);
    a[(1, 1)] += Complex64::new(1.0, 0.0);
    let a11 = a[(0, 0)].re;
    let a22 = a[(1, 1)].re;
    let cross = (a[(0, 1)] * a[(1, 0)]).re; // |a12|^2 for Hermitian A
    let det = a11 * a22 - cross;
    let g = gamma2;
    let eta = (a22 * a22 * g * g + 2.0 * (2.0 * cross - a11 * a22) * g + a11 * a11).sqrt();
    let plus = a22 * g + a11 + eta;
    // log2 of (a22 g + a11 - eta)/(a22 g + a11 + eta), in the stable form
    let log_ratio = (4.0 * g * det).log2() - 2.0 * plus.log2();
    let coeff = (a22 * g - a11) / (2.0 * eta);
    let r1 = 0.5 * (g * det).log2() + coeff * log_ratio;
    let r2 = 0.5 * (det / g).log2() - coeff * log_ratio;
    Ok((r1, r2))
}

/// The matched decoder SINR-variance curve for one user along a gamma track.
///
/// `psi` is 1 below `phi_at_one`, follows the sampled inverse detector
/// transfer on `[phi_at_one, phi_at_zero)` and is 0 beyond; it is monotone
/// nonincreasing by construction.
#[derive(Debug, Clone)]
pub struct MatchedDecoderCurve {
    /// Sampled SINR abscissae, ascending, inside `[phi_at_one, phi_at_zero)`.
    pub rho: Vec<f64>,
    /// Matched decoder output variance at each abscissa (`= v_i` on the track).
    pub psi: Vec<f64>,
    /// Detector SINR with every prior variance at 1.
    pub phi_at_one: f64,
    /// Detector SINR in the perfect-prior limit (`|h'_i|^2 / noise_var`).
    pub phi_at_zero: f64,
}

impl MatchedDecoderCurve {
    /// Evaluates the piecewise curve.
    pub fn eval(&self, rho: f64) -> f64 {
        if rho < self.phi_at_one {
            return 1.0;
        }
        if rho >= self.phi_at_zero {
            return 0.0;
        }
        match self.rho.binary_search_by(|x| x.total_cmp(&rho)) {
            Ok(k) => self.psi[k],
            Err(0) => 1.0,
            Err(k) if k == self.rho.len() => *self.psi.last().unwrap_or(&0.0),
            Err(k) => {
                let (r0, r1) = (self.rho[k - 1], self.rho[k]);
                let t = (rho - r0) / (r1 - r0);
                self.psi[k - 1] * (1.0 - t) + self.psi[k] * t
            }
        }
    }
}

/// Samples the matched decoder curve of `user` on a log grid of the track
/// position (`grid_points` nodes of `s = 1/v1` between 1 and `1e12`).
pub fn matched_psi(
    hp: &CMatrix,
    noise_var: f64,
    gamma: &GammaVector,
    user: usize,
    grid_points: usize,
) -> Result<MatchedDecoderCurve> {
    let nu = hp.ncols();
    if user >= nu {
        return Err(Error::Invalid(format!("user index {user} out of range")));
    }
    if gamma.len() != nu {
        return Err(Error::Dimension(format!("{} gammas for {} users", gamma.len(), nu)));
    }
    let n = grid_points.max(16);
    let b = weighted_precision(hp, noise_var, gamma);
    let g_i = gamma.as_slice()[user];
    let phi_at_zero = hp.column(user).norm_squared() / noise_var;
    let ln_smax = (1e12f64).ln();
    let mut rho = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    let mut phi_at_one = 0.0;
    for k in 0..n {
        let s = ((k as f64) / (n - 1) as f64 * ln_smax).exp();
        let v_user = 1.0 / (1.0 + (s - 1.0) / g_i);
        let vpost = g_i * shifted_inverse_diag(&b, s)[user];
        let phi = 1.0 / vpost - 1.0 / v_user;
        if k == 0 {
            phi_at_one = phi;
        }
        rho.push(phi);
        psi.push(v_user);
    }
    // the transfer is monotone along the track; enforce strict ordering of
    // abscissae against roundoff at the flat far end
    let mut clean_rho = Vec::with_capacity(n);
    let mut clean_psi = Vec::with_capacity(n);
    for k in 0..n {
        if clean_rho.last().map_or(true, |&last| rho[k] > last) && rho[k] < phi_at_zero {
            clean_rho.push(rho[k]);
            clean_psi.push(psi[k]);
        }
    }
    Ok(MatchedDecoderCurve { rho: clean_rho, psi: clean_psi, phi_at_one, phi_at_zero })
}

/// Achievable rate from a matched decoder curve, in bits:
/// `R = [ int_0^inf (rho + 1/psi(rho))^-1 d rho ] / ln 2`.
pub fn rate_from_psi(curve: &MatchedDecoderCurve) -> f64 {
    // psi = 1 piece: integral of 1/(1 + rho) up to phi_at_one
    let mut acc = (1.0 + curve.phi_at_one).ln();
    // sampled piece, trapezoid in rho; integrand written as psi/(rho psi + 1)
    // so the psi -> 0 end stays finite
    let f = |rho: f64, psi: f64| psi / (rho * psi + 1.0);
    if !curve.rho.is_empty() {
        let first = f(curve.rho[0], curve.psi[0]);
        let at_one = f(curve.phi_at_one, 1.0);
        acc += 0.5 * (at_one + first) * (curve.rho[0] - curve.phi_at_one).max(0.0);
        for k in 1..curve.rho.len() {
            let lo = f(curve.rho[k - 1], curve.psi[k - 1]);
            let hi = f(curve.rho[k], curve.psi[k]);
            acc += 0.5 * (lo + hi) * (curve.rho[k] - curve.rho[k - 1]);
        }
    }
    acc / LN_2
}

/// Rate vector of the successive-cancellation limit: weights grow
/// geometrically along `order` with the given ratio, then the closed form is
/// evaluated. With `ratio >> 1` this converges to the maximal extreme point
/// of that order.
pub fn extreme_point_limit(
    hp: &CMatrix,
    noise_var: f64,
    order: &[usize],
    ratio: f64,
) -> Result<RatePoint> {
    let nu = hp.ncols();
    if order.len() != nu {
        return Err(Error::Invalid("order must be a permutation of all users".into()));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Invalid("ratio must be finite and positive".into()));
    }
    let mut g = vec![0.0; nu];
    for (j, &k) in order.iter().enumerate() {
        if k >= nu || g[k] != 0.0 {
            return Err(Error::Invalid("order is not a permutation".into()));
        }
        g[k] = ratio.powi(j as i32);
    }
    let gamma = GammaVector::new(g)?;
    let rates = user_rates_closed_form(hp, noise_var, &gamma);
    Ok(RatePoint(rates.into_iter().map(|r| r.max(0.0)).collect()))
}

/// Convenience: evaluate `phi_i` along the track at a given `v1` for all
/// users (used by CLI track dumps).
pub fn track_phis(hp: &CMatrix, noise_var: f64, gamma: &GammaVector, v1: f64) -> Result<Vec<f64>> {
    let vpost = posterior_cov_on_track(hp, noise_var, gamma, v1)?;
    let vars = track_variances(gamma, v1)?;
    Ok(vpost
        .iter()
        .zip(&vars)
        .map(|(&vp, &v)| 1.0 / vp - 1.0 / clamp_variance(v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{maximal_extreme_point, sum_capacity};
    use crate::model::{parse_matrix, sample_iid_gaussian_channel};
    use approx::assert_relative_eq;

    fn fig6() -> CMatrix {
        parse_matrix("1.32 -1.31\n-1.43 0.74\n").unwrap()
    }

    #[test]
    fn track_symmetric_and_endpoints() {
        let g = GammaVector::ones(3);
        let v = track_variances(&g, 0.37).unwrap();
        assert!(v.iter().all(|&x| (x - 0.37).abs() < 1e-15));
        let v1 = track_variances(&GammaVector::new(vec![1.0, 7.0]).unwrap(), 1.0).unwrap();
        assert!(v1.iter().all(|&x| x == 1.0));
        // huge gamma_2 keeps user 2 unresolved along the track
        let g = GammaVector::new(vec![1.0, 1e12]).unwrap();
        let v = track_variances(&g, 0.2).unwrap();
        assert!(v[1] > 1.0 - 1e-10);
        assert!(track_variances(&g, 0.0).is_err());
        assert!(track_variances(&g, 1.5).is_err());
    }

    #[test]
    fn track_cov_matches_detector_and_asymptote() {
        let hp = sample_iid_gaussian_channel(3, 3, 40);
        let gamma = GammaVector::new(vec![1.0, 2.5, 0.4]).unwrap();
        for &v1 in &[1.0, 0.6, 0.05] {
            let diag = posterior_cov_on_track(&hp, 0.5, &gamma, v1).unwrap();
            let vars = track_variances(&gamma, v1).unwrap();
            let oracle = crate::detector::posterior_variances(&hp, 0.5, &vars);
            for i in 0..3 {
                assert_relative_eq!(diag[i], oracle[i], max_relative = 1e-12);
            }
        }
        // v1 = 1 pins the unit-variance start
        let diag = posterior_cov_on_track(&hp, 0.5, &gamma, 1.0).unwrap();
        let oracle = crate::detector::posterior_variances(&hp, 0.5, &[1.0, 1.0, 1.0]);
        for i in 0..3 {
            assert_relative_eq!(diag[i], oracle[i], max_relative = 1e-12);
        }
        // small-v1 asymptote: diagonal approaches gamma_i * v1
        let v1 = 1e-8;
        let diag = posterior_cov_on_track(&hp, 0.5, &gamma, v1).unwrap();
        for i in 0..3 {
            assert_relative_eq!(diag[i] / (gamma.as_slice()[i] * v1), 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn single_user_unit_channel_rate_is_one_bit() {
        let hp = CMatrix::identity(1, 1);
        let gamma = GammaVector::ones(1);
        let spec = QuadratureSpec::default();
        let r = user_rate_numeric(&hp, 1.0, &gamma, 0, &spec).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-7);
        assert_relative_eq!(user_rate_closed_form(&hp, 1.0, &gamma, 0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_sums_telescope_to_capacity() {
        for seed in 0..30u64 {
            let nu = 2 + (seed % 4) as usize;
            let nr = 2 + (seed % 3) as usize;
            let hp = sample_iid_gaussian_channel(nr, nu, 1000 + seed);
            let mut rng = crate::rng::rng_from_seed(seed);
            use rand::Rng;
            let g: Vec<f64> = (0..nu).map(|_| 10f64.powf(rng.gen::<f64>() * 4.0 - 2.0)).collect();
            let gamma = GammaVector::new(g).unwrap();
            let rates = user_rates_closed_form(&hp, 0.5, &gamma);
            let sum: f64 = rates.iter().sum();
            assert!((sum - sum_capacity(&hp, 0.5)).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn closed_form_decoupled_users_ignore_gamma() {
        // orthogonal columns: diagonal Gram
        let mut hp = CMatrix::zeros(3, 3);
        hp[(0, 0)] = Complex64::new(1.5, 0.0);
        hp[(1, 1)] = Complex64::new(0.7, 0.4);
        hp[(2, 2)] = Complex64::new(2.0, -1.0);
        let s2 = 0.6;
        for g2 in [0.01, 1.0, 55.0] {
            let gamma = GammaVector::new(vec![1.0, g2, 3.0]).unwrap();
            let rates = user_rates_closed_form(&hp, s2, &gamma);
            for i in 0..3 {
                let expect = (1.0 + hp.column(i).norm_squared() / s2).log2();
                assert_relative_eq!(rates[i], expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn numeric_matches_closed_form() {
        let spec = QuadratureSpec::default();
        for seed in 0..10u64 {
            let nu = 2 + (seed % 3) as usize;
            let hp = sample_iid_gaussian_channel(3, nu, 2000 + seed);
            let mut rng = crate::rng::rng_from_seed(seed + 7);
            use rand::Rng;
            let g: Vec<f64> = (0..nu).map(|_| 10f64.powf(rng.gen::<f64>() * 4.0 - 2.0)).collect();
            let gamma = GammaVector::new(g).unwrap();
            let numeric = user_rates_numeric(&hp, 0.5, &gamma, &spec).unwrap();
            let closed = user_rates_closed_form(&hp, 0.5, &gamma);
            for i in 0..nu {
                assert!(
                    (numeric[i] - closed[i]).abs() < 1e-6,
                    "seed {seed} user {i}: {} vs {}",
                    numeric[i],
                    closed[i]
                );
            }
        }
    }

    #[test]
    fn two_user_closed_matches_eigen_route_and_limits() {
        let hp = fig6();
        let s2 = 0.5;
        let csum = sum_capacity(&hp, s2);
        for k in 0..40 {
            let g = 10f64.powf(-2.0 + 4.0 * k as f64 / 39.0);
            let (r1, r2) = two_user_rates_closed(&hp, s2, g).unwrap();
            let gamma = GammaVector::new(vec![1.0, g]).unwrap();
            let eigen = user_rates_closed_form(&hp, s2, &gamma);
            assert!((r1 - eigen[0]).abs() < 1e-8, "g={g}");
            assert!((r2 - eigen[1]).abs() < 1e-8, "g={g}");
            assert_relative_eq!(r1 + r2, csum, epsilon = 1e-10);
        }
        // frozen spot value at gamma = 1 (independent oracle, eigen route)
        let (r1, _) = two_user_rates_closed(&hp, s2, 1.0).unwrap();
        assert_relative_eq!(r1, 2.4537086694, epsilon = 1e-9);
        // extreme limits: gamma -> inf approaches the order-(0,1) corner,
        // gamma -> 0 the order-(1,0) corner
        let e01 = maximal_extreme_point(&hp, s2, &[0, 1]).unwrap();
        let e10 = maximal_extreme_point(&hp, s2, &[1, 0]).unwrap();
        let (r1, r2) = two_user_rates_closed(&hp, s2, 1e9).unwrap();
        assert!((r1 - e01.rates.0[0]).abs() < 1e-6);
        assert!((r2 - e01.rates.0[1]).abs() < 1e-6);
        let (r1, r2) = two_user_rates_closed(&hp, s2, 1e-9).unwrap();
        assert!((r1 - e10.rates.0[0]).abs() < 1e-6);
        assert!((r2 - e10.rates.0[1]).abs() < 1e-6);
    }

    #[test]
    fn two_user_requires_two_columns() {
        let hp = sample_iid_gaussian_channel(2, 3, 1);
        assert!(two_user_rates_closed(&hp, 0.5, 1.0).is_err());
    }

    #[test]
    fn matched_curve_shape() {
        let hp = fig6();
        let gamma = GammaVector::new(vec![1.0, 2.0]).unwrap();
        let curve = matched_psi(&hp, 0.5, &gamma, 0, 400).unwrap();
        assert_eq!(curve.eval(0.0), 1.0);
        assert_eq!(curve.eval(curve.phi_at_zero * 1.01), 0.0);
        // psi monotone nonincreasing along rho samples
        for w in curve.psi.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        // rho * psi -> 0 at the far end (compact support)
        let last = curve.rho.len() - 1;
        assert!(curve.rho[last] * curve.psi[last] < 1e-6);
    }

    #[test]
    fn rate_from_psi_zero_curve() {
        let curve = MatchedDecoderCurve {
            rho: vec![],
            psi: vec![],
            phi_at_one: 0.0,
            phi_at_zero: 0.0,
        };
        assert_eq!(rate_from_psi(&curve), 0.0);
    }

    #[test]
    fn rate_from_psi_matches_two_user_closed_form() {
        let hp = fig6();
        let s2 = 0.5;
        let g2 = 2.3;
        let gamma = GammaVector::new(vec![1.0, g2]).unwrap();
        let (r1, r2) = two_user_rates_closed(&hp, s2, g2).unwrap();
        for (user, expect) in [(0usize, r1), (1, r2)] {
            let curve = matched_psi(&hp, s2, &gamma, user, 6000).unwrap();
            let got = rate_from_psi(&curve);
            assert!((got - expect).abs() < 1e-4, "user {user}: {got} vs {expect}");
        }
    }

    #[test]
    fn rate_from_psi_symmetric_split() {
        // orthonormal columns scaled equally: fully symmetric two-user system
        let hp = parse_matrix("0.70710678118654752 0.70710678118654752\n0.70710678118654752 -0.70710678118654752\n").unwrap();
        let s2 = 0.4;
        let gamma = GammaVector::ones(2);
        let csum = sum_capacity(&hp, s2);
        for user in 0..2 {
            let curve = matched_psi(&hp, s2, &gamma, user, 6000).unwrap();
            assert!((rate_from_psi(&curve) - csum / 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn lemma2_monotone_in_gamma() {
        for seed in 0..5u64 {
            let hp = sample_iid_gaussian_channel(2, 3, 3000 + seed);
            let mut last = vec![f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY];
            for k in 0..30 {
                let g1 = 10f64.powf(-2.0 + 4.0 * k as f64 / 29.0);
                let gamma = GammaVector::new(vec![1.0, g1, 0.7]).unwrap();
                let r = user_rates_closed_form(&hp, 0.5, &gamma);
                assert!(r[1] >= last[0] - 1e-10, "R_2 must rise with gamma_2");
                assert!(r[0] <= last[1] + 1e-10, "R_1 must fall with gamma_2");
                assert!(r[2] <= last[2] + 1e-10, "R_3 must fall with gamma_2");
                last = vec![r[1], r[0], r[2]];
            }
        }
    }

    #[test]
    fn extreme_point_limit_reaches_corners() {
        let hp = sample_iid_gaussian_channel(3, 3, 41);
        let s2 = 0.7;
        for order in [[0usize, 1, 2], [2, 1, 0], [1, 0, 2]] {
            let limit = extreme_point_limit(&hp, s2, &order, 1e6).unwrap();
            let corner = maximal_extreme_point(&hp, s2, &order).unwrap();
            for i in 0..3 {
                assert!(
                    (limit.0[i] - corner.rates.0[i]).abs() < 1e-3,
                    "order {order:?} user {i}"
                );
            }
        }
        // ratio 1 collapses to the symmetric (non-corner) point
        let sym = extreme_point_limit(&hp, s2, &[0, 1, 2], 1.0).unwrap();
        let corner = maximal_extreme_point(&hp, s2, &[0, 1, 2]).unwrap();
        let dist: f64 = (0..3).map(|i| (sym.0[i] - corner.rates.0[i]).abs()).sum();
        assert!(dist > 0.05);
    }
}
