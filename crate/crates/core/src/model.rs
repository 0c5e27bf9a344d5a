//! System model: channel instances, the equivalent channel, channel sampling
//! and AWGN observation.
//!
//! The uplink is `y(t) = H' x(t) + n(t)` where `H'` scales column `i` of the
//! physical channel by the user amplitude `w_i`, symbols are unit variance and
//! `n` is circularly-symmetric complex Gaussian with total variance
//! `noise_var` per receive antenna (variance split equally between real and
//! imaginary parts).

use crate::linalg::CMatrix;
use crate::rng::rng_from_seed;
use crate::{Error, Result};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

/// A fixed channel realization together with per-user transmit powers and
/// the receiver noise variance.
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    h: CMatrix,
    powers: Vec<f64>,
    noise_var: f64,
}

impl ChannelInstance {
    /// `powers` holds `w_i^2` per user; all powers and `noise_var` must be
    /// strictly positive and `powers.len()` must equal the column count of `h`.
    pub fn new(h: CMatrix, powers: Vec<f64>, noise_var: f64) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::Invalid("channel matrix must be nonempty".into()));
        }
        if powers.len() != h.ncols() {
            return Err(Error::Dimension(format!(
                "{} powers for {} users",
                powers.len(),
                h.ncols()
            )));
        }
        if powers.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::Invalid("user powers must be strictly positive".into()));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::Invalid("noise variance must be strictly positive".into()));
        }
        Ok(Self { h, powers, noise_var })
    }

    /// Unit-power constructor: all `w_i^2 = 1`.
    pub fn with_unit_powers(h: CMatrix, noise_var: f64) -> Result<Self> {
        let n = h.ncols();
        Self::new(h, vec![1.0; n], noise_var)
    }

    pub fn n_rx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols()
    }

    pub fn physical_channel(&self) -> &CMatrix {
        &self.h
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// The equivalent channel `H'`: column `i` of `H` scaled by `w_i`.
    pub fn equivalent_channel(&self) -> CMatrix {
        let mut hp = self.h.clone();
        for (i, &p) in self.powers.iter().enumerate() {
            hp.column_mut(i).scale_mut(p.sqrt());
        }
        hp
    }
}

/// A block of transmitted symbols and the matching received block.
#[derive(Debug, Clone)]
pub struct SymbolBlock {
    /// Transmitted symbols, `N_u x N`, unit variance per user.
    pub x: CMatrix,
    /// Received samples, `N_r x N`.
    pub y: CMatrix,
}

/// Samples an `n_r x n_u` matrix with IID circularly-symmetric complex
/// Gaussian entries of unit total variance. Deterministic in `seed`.
pub fn sample_iid_gaussian_channel(n_r: usize, n_u: usize, seed: u64) -> CMatrix {
    assert!(n_r >= 1 && n_u >= 1);
    let mut rng = rng_from_seed(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n_r, n_u, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re * half, im * half)
    })
}

/// Samples an `n_r x n_u` matrix with IID real standard Gaussian entries
/// (zero imaginary part). Used by the real-valued coded-link convention.
pub fn sample_iid_real_channel(n_r: usize, n_u: usize, seed: u64) -> CMatrix {
    assert!(n_r >= 1 && n_u >= 1);
    let mut rng = rng_from_seed(seed);
    CMatrix::from_fn(n_r, n_u, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, 0.0)
    })
}

/// `y = H' x + n` with `n` IID `CN(0, noise_var)` per entry.
pub fn awgn_observe(hprime: &CMatrix, x: &CMatrix, noise_var: f64, seed: u64) -> Result<CMatrix> {
    if hprime.ncols() != x.nrows() {
        return Err(Error::Dimension(format!(
            "channel has {} columns but symbol block has {} rows",
            hprime.ncols(),
            x.nrows()
        )));
    }
    if noise_var < 0.0 {
        return Err(Error::Invalid("noise variance must be nonnegative".into()));
    }
    let mut y = hprime * x;
    let mut rng = rng_from_seed(seed);
    let s = (noise_var * 0.5).sqrt();
    for v in y.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(re * s, im * s);
    }
    Ok(y)
}

/// Parses the plain-text matrix format: one row per line, entries like
/// `1.25`, `-0.3+0.7J` or `0.5-1J`, separated by whitespace. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            row.push(parse_entry(tok).map_err(|msg| Error::Parse { line: lineno + 1, msg })?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {} entries, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no matrix rows found".into() });
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(CMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn parse_entry(tok: &str) -> std::result::Result<Complex64, String> {
    let t = tok.trim();
    if let Some(body) = t.strip_suffix(['J', 'j']) {
        // find the sign that splits re and im (skip a leading sign)
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            if (bytes[k] == b'+' || bytes[k] == b'-') && bytes[k - 1] != b'e' && bytes[k - 1] != b'E' {
                split = Some(k);
                break;
            }
        }
        let k = split.ok_or_else(|| format!("`{t}`: missing real part separator"))?;
        let re: f64 = body[..k].parse().map_err(|_| format!("`{t}`: bad real part"))?;
        let im_str = &body[k..];
        let im: f64 = if im_str == "+" || im_str == "-" {
            format!("{im_str}1").parse().unwrap()
        } else {
            im_str.parse().map_err(|_| format!("`{t}`: bad imaginary part"))?
        };
        Ok(Complex64::new(re, im))
    } else {
        let re: f64 = t.parse().map_err(|_| format!("`{t}`: not a number"))?;
        Ok(Complex64::new(re, 0.0))
    }
}

/// Writes a matrix in the plain-text format accepted by [`parse_matrix`].
/// Floats use Rust's shortest round-trip representation.
pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let v = m[(i, j)];
            if v.im == 0.0 {
                out.push_str(&format!("{}", v.re));
            } else if v.im >= 0.0 {
                out.push_str(&format!("{}+{}J", v.re, v.im));
            } else {
                out.push_str(&format!("{}{}J", v.re, v.im));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig6_channel() -> CMatrix {
        parse_matrix("1.32 -1.31\n-1.43 0.74\n").unwrap()
    }

    #[test]
    fn equivalent_channel_identity_scaling() {
        let h = fig6_channel();
        let ch = ChannelInstance::with_unit_powers(h.clone(), 0.5).unwrap();
        assert_eq!(ch.equivalent_channel(), h);
    }

    #[test]
    fn equivalent_channel_scales_column_norms() {
        let h = fig6_channel();
        let ch = ChannelInstance::new(h.clone(), vec![4.0, 1.0], 1.0).unwrap();
        let hp = ch.equivalent_channel();
        assert_relative_eq!(hp.column(0).norm(), 2.0 * h.column(0).norm(), max_relative = 1e-14);
        assert_relative_eq!(hp.column(1).norm(), h.column(1).norm(), max_relative = 1e-14);
    }

    #[test]
    fn channel_sampling_is_deterministic_and_shaped() {
        let a = sample_iid_gaussian_channel(2, 3, 99);
        let b = sample_iid_gaussian_channel(2, 3, 99);
        assert_eq!(a, b);
        assert_eq!((a.nrows(), a.ncols()), (2, 3));
        assert_ne!(a, sample_iid_gaussian_channel(2, 3, 100));
    }

    #[test]
    fn channel_sampling_unit_variance() {
        // 10^4 scalar draws; empirical variance within 3%
        let n = 10_000;
        let m = sample_iid_gaussian_channel(1, n, 5);
        let var: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.03, "empirical variance {var}");
    }

    #[test]
    fn awgn_noiseless_limit_and_determinism() {
        let hp = fig6_channel();
        let x = CMatrix::from_fn(2, 7, |i, j| Complex64::new((i + j) as f64 * 0.2 - 0.5, 0.1));
        let y0 = awgn_observe(&hp, &x, 0.0, 1).unwrap();
        assert!((&y0 - &hp * &x).norm() == 0.0);
        let y1 = awgn_observe(&hp, &x, 0.3, 42).unwrap();
        let y2 = awgn_observe(&hp, &x, 0.3, 42).unwrap();
        assert_eq!(y1, y2);
    }

    #[test]
    fn awgn_pure_noise_variance() {
        let hp = CMatrix::identity(1, 1);
        let n = 100_000;
        let x = CMatrix::zeros(1, n);
        let nv = 0.8;
        let y = awgn_observe(&hp, &x, nv, 3).unwrap();
        let var: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        // 3-sigma bound for the mean of |CN(0,nv)|^2 over n samples
        let bound = 3.0 * nv / (n as f64).sqrt();
        assert!((var - nv).abs() < bound, "variance {var} vs {nv}");
    }

    #[test]
    fn awgn_dimension_mismatch_rejected() {
        let hp = fig6_channel();
        let x = CMatrix::zeros(3, 4);
        assert!(matches!(awgn_observe(&hp, &x, 0.1, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn matrix_text_round_trip() {
        let m = CMatrix::from_fn(2, 3, |i, j| {
            Complex64::new(i as f64 - 0.37 * j as f64, if j == 1 { -1.25 } else { 0.0 })
        });
        let txt = format_matrix(&m);
        let back = parse_matrix(&txt).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn parse_rejects_garbage_and_ragged_rows() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("1.0 2.0\n3.0\n").is_err());
        assert!(parse_matrix("1.0 x\n").is_err());
    }
}
