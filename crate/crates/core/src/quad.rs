//! Adaptive Gauss–Kronrod quadrature for smooth scalar and vector integrands.
//!
//! A 7-point Gauss / 15-point Kronrod pair supplies the per-interval error
//! estimate; the interval with the largest error is split until the summed
//! estimate drops below the requested absolute tolerance.

use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

// 15-point Kronrod abscissae on [-1, 1] (positive half) and weights,
// with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> Vec<f64>>(f: &mut F, a: f64, b: f64) -> Segment {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let dim_probe = f(mid);
    let dim = dim_probe.len();
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    // center point (index 7): Kronrod weight WGK[7], Gauss weight WG[3]
    for (k, v) in dim_probe.iter().enumerate() {
        kronrod[k] += WGK[7] * v;
        gauss[k] += WG[3] * v;
    }
    for j in 0..7 {
        let lo = f(mid - half * XGK[j]);
        let hi = f(mid + half * XGK[j]);
        for k in 0..dim {
            kronrod[k] += WGK[j] * (lo[k] + hi[k]);
        }
        if j % 2 == 1 {
            // odd Kronrod indices are the embedded Gauss nodes
            let wg = WG[j / 2];
            for k in 0..dim {
                gauss[k] += wg * (lo[k] + hi[k]);
            }
        }
    }
    let mut err = 0.0f64;
    for k in 0..dim {
        kronrod[k] *= half;
        gauss[k] *= half;
        err = err.max((kronrod[k] - gauss[k]).abs());
    }
    Segment { a, b, value: kronrod, error: err }
}

/// Integrates a vector-valued integrand over `[a, b]` to absolute tolerance
/// `abs_tol` (max-norm across components). `initial_splits` seeds the interval
/// list, which helps integrands concentrated near one endpoint.
pub fn integrate_vec<F: FnMut(f64) -> Vec<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    initial_splits: &[f64],
    max_segments: usize,
) -> Result<Vec<f64>> {
    let mut heap = BinaryHeap::new();
    let mut edges: Vec<f64> = Vec::with_capacity(initial_splits.len() + 2);
    edges.push(a);
    edges.extend(initial_splits.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let seg = gk15(&mut f, w[0], w[1]);
        total_err += seg.error;
        heap.push(seg);
    }
    while total_err > abs_tol {
        if heap.len() >= max_segments {
            return Err(Error::NonConvergence(format!(
                "quadrature error {total_err:.3e} above tolerance {abs_tol:.3e} \
                 after {max_segments} segments"
            )));
        }
        let worst = heap.pop().expect("heap nonempty");
        total_err -= worst.error;
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::NonConvergence(
                "quadrature interval collapsed below machine precision".into(),
            ));
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        total_err += left.error + right.error;
        heap.push(left);
        heap.push(right);
    }
    let dim = heap.peek().map_or(0, |s| s.value.len());
    let mut out = vec![0.0; dim];
    for seg in heap {
        for k in 0..dim {
            out[k] += seg.value[k];
        }
    }
    Ok(out)
}

/// Scalar convenience wrapper over [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    Ok(integrate_vec(|x| vec![f(x)], a, b, abs_tol, &[], 4096)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn decaying_tail_on_wide_interval() {
        // integral of 1/x^2 over [1, 1e6] = 1 - 1e-6
        let v = integrate(|x| x.powi(-2), 1.0, 1e6, 1e-10).unwrap();
        assert_relative_eq!(v, 1.0 - 1e-6, epsilon = 1e-9);
    }

    #[test]
    fn vector_components_converge_jointly() {
        let v = integrate_vec(
            |x| vec![x.exp(), (2.0 * x).sin()],
            0.0,
            1.0,
            1e-12,
            &[],
            1024,
        )
        .unwrap();
        assert_relative_eq!(v[0], 1f64.exp() - 1.0, epsilon = 1e-11);
        assert_relative_eq!(v[1], (1.0 - (2f64).cos()) / 2.0, epsilon = 1e-11);
    }

    #[test]
    fn budget_exhaustion_reports_error() {
        let r = integrate_vec(|x| vec![(1e6 * x).sin().abs()], 0.0, 1.0, 1e-14, &[], 8);
        assert!(r.is_err());
    }
}
