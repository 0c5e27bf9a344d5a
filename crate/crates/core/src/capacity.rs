//! Capacity region of the MIMO-NOMA uplink: subset rate bounds, sum capacity,
//! maximal extreme points, membership tests and projection onto the dominant
//! face.
//!
//! The region is the polymatroid
//! `{ R >= 0 : sum_{i in S} R_i <= log2|I + H'_S^H H'_S / noise_var| }`
//! over all nonempty user subsets `S`; its dominant face is the facet where
//! the full-set bound holds with equality. Users are indexed from 0.

use crate::linalg::{logdet2_eye_plus_gram, CMatrix};
use crate::{Error, Result};

/// Largest user count for which exhaustive subset enumeration is attempted.
pub const MAX_EXHAUSTIVE_USERS: usize = 20;

/// A vector of per-user rates in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint(pub Vec<f64>);

impl RatePoint {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Invalid("rates must be finite and nonnegative".into()));
        }
        Ok(Self(rates))
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A maximal extreme point of the capacity region: the successive-cancellation
/// corner for a given decoding order (`order[0]` decoded first).
#[derive(Debug, Clone)]
pub struct ExtremePoint {
    pub order: Vec<usize>,
    pub rates: RatePoint,
}

fn column_submatrix(hp: &CMatrix, subset: &[usize]) -> CMatrix {
    let mut m = CMatrix::zeros(hp.nrows(), subset.len());
    for (k, &j) in subset.iter().enumerate() {
        m.set_column(k, &hp.column(j));
    }
    m
}

/// `log2 |I + H'_S^H H'_S / noise_var|` for a nonempty user subset `S`.
pub fn subset_rate_bound(hp: &CMatrix, noise_var: f64, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Invalid("subset must be nonempty".into()));
    }
    let mut seen = vec![false; hp.ncols()];
    for &j in subset {
        if j >= hp.ncols() {
            return Err(Error::Invalid(format!("user index {j} out of range")));
        }
        if seen[j] {
            return Err(Error::Invalid(format!("user index {j} repeated in subset")));
        }
        seen[j] = true;
    }
    let hs = column_submatrix(hp, subset);
    Ok(logdet2_eye_plus_gram(&hs, 1.0 / noise_var))
}

/// Sum capacity `log2 |I + H'^H H' / noise_var|`.
pub fn sum_capacity(hp: &CMatrix, noise_var: f64) -> f64 {
    logdet2_eye_plus_gram(hp, 1.0 / noise_var)
}

fn validate_order(n_users: usize, order: &[usize]) -> Result<()> {
    if order.len() != n_users {
        return Err(Error::Invalid(format!(
            "order has {} entries for {} users",
            order.len(),
            n_users
        )));
    }
    let mut seen = vec![false; n_users];
    for &k in order {
        if k >= n_users || seen[k] {
            return Err(Error::Invalid("order is not a permutation".into()));
        }
        seen[k] = true;
    }
    Ok(())
}

/// The maximal extreme point for a decoding order. The first user in `order`
/// is decoded against all interference; the last sees a clean channel. Each
/// rate is a ratio of subset log-dets, so the rates telescope to the sum
/// capacity.
pub fn maximal_extreme_point(hp: &CMatrix, noise_var: f64, order: &[usize]) -> Result<ExtremePoint> {
    let n = hp.ncols();
    validate_order(n, order)?;
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut rates = vec![0.0; n];
    for &k in order {
        let with_k = subset_rate_bound(hp, noise_var, &remaining)?;
        let rest: Vec<usize> = remaining.iter().copied().filter(|&j| j != k).collect();
        let without_k = if rest.is_empty() {
            0.0
        } else {
            subset_rate_bound(hp, noise_var, &rest)?
        };
        rates[k] = with_k - without_k;
        remaining = rest;
    }
    Ok(ExtremePoint { order: order.to_vec(), rates: RatePoint(rates) })
}

fn for_each_subset(n: usize, mut f: impl FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
    let mut subset = Vec::with_capacity(n);
    for mask in 1u64..(1u64 << n) {
        subset.clear();
        for j in 0..n {
            if mask & (1 << j) != 0 {
                subset.push(j);
            }
        }
        if !f(&subset)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Membership test against all `2^{N_u} - 1` subset bounds with a `1e-9`
/// slack. Errors for more than [`MAX_EXHAUSTIVE_USERS`] users; sample the
/// bounds instead at that scale.
pub fn in_region(hp: &CMatrix, noise_var: f64, r: &RatePoint) -> Result<bool> {
    let n = hp.ncols();
    if r.len() != n {
        return Err(Error::Dimension(format!("{} rates for {} users", r.len(), n)));
    }
    if n > MAX_EXHAUSTIVE_USERS {
        return Err(Error::Invalid(format!(
            "exhaustive membership test limited to {MAX_EXHAUSTIVE_USERS} users; \
             sample subset bounds instead"
        )));
    }
    for_each_subset(n, |subset| {
        let rs: f64 = subset.iter().map(|&j| r.0[j]).sum();
        let bound = subset_rate_bound(hp, noise_var, subset)?;
        Ok(rs <= bound + 1e-9)
    })
}

/// Euclidean projection of `r` onto the dominant face (the sum-capacity facet)
/// of the capacity region, via Dykstra's alternating projections over the sum
/// hyperplane and every subset halfspace. Solver tolerance `1e-6` on
/// constraint violation; points already on the face are returned unchanged up
/// to that tolerance.
pub fn project_to_dominant_face(hp: &CMatrix, noise_var: f64, r: &RatePoint) -> Result<RatePoint> {
    let n = hp.ncols();
    if r.len() != n {
        return Err(Error::Dimension(format!("{} rates for {} users", r.len(), n)));
    }
    if n > MAX_EXHAUSTIVE_USERS {
        return Err(Error::Invalid(format!(
            "projection limited to {MAX_EXHAUSTIVE_USERS} users"
        )));
    }
    let csum = sum_capacity(hp, noise_var);

    // collect all proper nonempty subsets and their bounds once
    let mut subsets: Vec<(Vec<usize>, f64)> = Vec::new();
    for_each_subset(n, |s| {
        if s.len() < n {
            subsets.push((s.to_vec(), subset_rate_bound(hp, noise_var, s)?));
        }
        Ok(true)
    })?;

    let mut x: Vec<f64> = r.0.clone();
    // Dykstra corrections: one per constraint (index 0 = hyperplane)
    let mut corr: Vec<Vec<f64>> = vec![vec![0.0; n]; subsets.len() + 1];
    let tol = 1e-6;
    let max_sweeps = 20_000;
    for _ in 0..max_sweeps {
        // hyperplane sum = csum
        {
            let z: Vec<f64> = (0..n).map(|i| x[i] + corr[0][i]).collect();
            let shift = (csum - z.iter().sum::<f64>()) / n as f64;
            let newx: Vec<f64> = z.iter().map(|v| v + shift).collect();
            for i in 0..n {
                corr[0][i] = z[i] - newx[i];
            }
            x = newx;
        }
        // halfspaces
        for (ci, (s, bound)) in subsets.iter().enumerate() {
            let c = &mut corr[ci + 1];
            let mut z = x.clone();
            for i in 0..n {
                z[i] += c[i];
            }
            let excess = s.iter().map(|&j| z[j]).sum::<f64>() - bound;
            let mut newx = z.clone();
            if excess > 0.0 {
                let shift = excess / s.len() as f64;
                for &j in s {
                    newx[j] -= shift;
                }
            }
            for i in 0..n {
                c[i] = z[i] - newx[i];
            }
            x = newx;
        }
        // convergence: all constraints met
        let sum_err = (x.iter().sum::<f64>() - csum).abs();
        let worst = subsets
            .iter()
            .map(|(s, b)| s.iter().map(|&j| x[j]).sum::<f64>() - b)
            .fold(f64::NEG_INFINITY, f64::max);
        if sum_err <= tol && worst <= tol {
            return Ok(RatePoint(x));
        }
    }
    Err(Error::NonConvergence(
        "dominant-face projection did not settle".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_matrix, sample_iid_gaussian_channel};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn fig6() -> CMatrix {
        parse_matrix("1.32 -1.31\n-1.43 0.74\n").unwrap()
    }

    /// Independent oracle: log2 det of a 2x2 complex matrix by the ad - bc rule.
    fn logdet2_2x2_direct(m: &CMatrix) -> f64 {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        det.re.log2()
    }

    #[test]
    fn scalar_channel_one_bit() {
        let hp = CMatrix::identity(1, 1);
        assert_relative_eq!(subset_rate_bound(&hp, 1.0, &[0]).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_channel_zero_bound() {
        let hp = CMatrix::zeros(3, 2);
        for s in [&[0usize][..], &[1], &[0, 1]] {
            assert_eq!(subset_rate_bound(&hp, 0.25, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn fig6_full_subset_matches_direct_logdet() {
        let hp = fig6();
        let g = hp.adjoint() * &hp;
        let m = CMatrix::identity(2, 2) + g * Complex64::new(2.0, 0.0); // 1/sigma^2 = 2
        let oracle = logdet2_2x2_direct(&m);
        let got = subset_rate_bound(&hp, 0.5, &[0, 1]).unwrap();
        assert_relative_eq!(got, oracle, epsilon = 1e-12);
        assert_relative_eq!(got, 4.028290575543, epsilon = 1e-10);
    }

    #[test]
    fn empty_subset_rejected() {
        assert!(subset_rate_bound(&fig6(), 0.5, &[]).is_err());
    }

    #[test]
    fn sum_capacity_identity_channel() {
        let hp = CMatrix::identity(2, 2);
        assert_relative_eq!(sum_capacity(&hp, 1.0), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn sum_capacity_sylvester_forms_agree() {
        let hp = sample_iid_gaussian_channel(3, 5, 11);
        let nu_form = {
            let g = hp.adjoint() * &hp;
            crate::linalg::logdet2(&(CMatrix::identity(5, 5) + g * Complex64::new(4.0, 0.0)))
        };
        let nr_form = {
            let g = &hp * hp.adjoint();
            crate::linalg::logdet2(&(CMatrix::identity(3, 3) + g * Complex64::new(4.0, 0.0)))
        };
        assert_relative_eq!(nu_form, nr_form, epsilon = 1e-10);
        assert_relative_eq!(sum_capacity(&hp, 0.25), nu_form, epsilon = 1e-10);
    }

    #[test]
    fn extreme_point_single_user_is_sum_capacity() {
        let hp = sample_iid_gaussian_channel(2, 1, 3);
        let ep = maximal_extreme_point(&hp, 0.6, &[0]).unwrap();
        assert_relative_eq!(ep.rates.0[0], sum_capacity(&hp, 0.6), epsilon = 1e-12);
    }

    #[test]
    fn extreme_points_share_sum_and_match_direct_formula() {
        let hp = fig6();
        let s2 = 0.5;
        let e01 = maximal_extreme_point(&hp, s2, &[0, 1]).unwrap();
        let e10 = maximal_extreme_point(&hp, s2, &[1, 0]).unwrap();
        let csum = sum_capacity(&hp, s2);
        assert_relative_eq!(e01.rates.sum(), csum, epsilon = 1e-12);
        assert_relative_eq!(e10.rates.sum(), csum, epsilon = 1e-12);
        // order (0,1): user 1 decoded last gets the clean single-user rate
        let r1_clean = (1.0 + hp.column(1).norm_squared() / s2).log2();
        assert_relative_eq!(e01.rates.0[1], r1_clean, epsilon = 1e-12);
        assert_relative_eq!(e01.rates.0[0], csum - r1_clean, epsilon = 1e-12);
    }

    #[test]
    fn invalid_permutation_rejected() {
        let hp = fig6();
        assert!(maximal_extreme_point(&hp, 0.5, &[0, 0]).is_err());
        assert!(maximal_extreme_point(&hp, 0.5, &[0]).is_err());
        assert!(maximal_extreme_point(&hp, 0.5, &[0, 2]).is_err());
    }

    #[test]
    fn region_membership_basics() {
        let hp = fig6();
        let s2 = 0.5;
        assert!(in_region(&hp, s2, &RatePoint(vec![0.0, 0.0])).unwrap());
        let ep = maximal_extreme_point(&hp, s2, &[0, 1]).unwrap();
        assert!(in_region(&hp, s2, &ep.rates).unwrap());
        let bumped = RatePoint(ep.rates.0.iter().map(|r| r + 1e-6).collect());
        assert!(!in_region(&hp, s2, &bumped).unwrap());
    }

    #[test]
    fn convex_combinations_of_extreme_points_stay_inside() {
        let hp = sample_iid_gaussian_channel(3, 3, 21);
        let s2 = 0.45;
        let orders: [&[usize]; 3] = [&[0, 1, 2], &[2, 1, 0], &[1, 2, 0]];
        let pts: Vec<RatePoint> = orders
            .iter()
            .map(|o| maximal_extreme_point(&hp, s2, o).unwrap().rates)
            .collect();
        let mut rng = crate::rng::rng_from_seed(8);
        use rand::Rng;
        for _ in 0..50 {
            let mut w: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let tot: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= tot);
            let mix: Vec<f64> = (0..3)
                .map(|i| (0..3).map(|k| w[k] * pts[k].0[i]).sum())
                .collect();
            assert!(in_region(&hp, s2, &RatePoint(mix)).unwrap());
        }
    }

    #[test]
    fn sum_capacity_monotone_in_power_and_noise() {
        let h = sample_iid_gaussian_channel(3, 4, 2);
        let mut last = 0.0;
        for k in 0..6 {
            let w = 0.5 + 0.35 * k as f64;
            let ch = crate::model::ChannelInstance::new(h.clone(), vec![w, 1.0, 1.0, 1.0], 0.8).unwrap();
            let c = sum_capacity(&ch.equivalent_channel(), 0.8);
            assert!(c >= last);
            last = c;
        }
        let mut last = f64::INFINITY;
        for k in 0..6 {
            let s2 = 0.2 + 0.4 * k as f64;
            let c = sum_capacity(&h, s2);
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn projection_fixed_point_on_face() {
        let hp = fig6();
        let s2 = 0.5;
        let ep = maximal_extreme_point(&hp, s2, &[0, 1]).unwrap();
        let proj = project_to_dominant_face(&hp, s2, &ep.rates).unwrap();
        for i in 0..2 {
            assert!((proj.0[i] - ep.rates.0[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn projection_symmetric_target_splits_evenly() {
        // symmetric channel: orthogonal equal-norm columns
        let hp = CMatrix::identity(2, 2) * Complex64::new(1.7, 0.0);
        let s2 = 0.9;
        let c = sum_capacity(&hp, s2);
        let target = RatePoint(vec![10.0, 10.0]);
        let proj = project_to_dominant_face(&hp, s2, &target).unwrap();
        assert_relative_eq!(proj.0[0], c / 2.0, epsilon = 1e-5);
        assert_relative_eq!(proj.0[1], c / 2.0, epsilon = 1e-5);
    }

    #[test]
    fn projection_of_random_target_lands_on_face() {
        let hp = sample_iid_gaussian_channel(2, 3, 77);
        let s2 = 0.7;
        let target = RatePoint(vec![4.0, 0.3, 2.5]);
        let proj = project_to_dominant_face(&hp, s2, &target).unwrap();
        assert!((proj.sum() - sum_capacity(&hp, s2)).abs() < 1e-5);
        // allow the solver tolerance when testing membership
        let shrunk = RatePoint(proj.0.iter().map(|r| (r - 2e-6).max(0.0)).collect());
        assert!(in_region(&hp, s2, &shrunk).unwrap());
    }
}
