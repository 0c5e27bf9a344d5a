//! Repetition-aided IRA multiuser codes and their EXIT-style analysis.
//!
//! A code in this family transmits `q` copies of each of the `K` information
//! bits plus `M` accumulator parity bits. Information bits additionally carry
//! an irregular edge profile `lambda` (edge-perspective fractions per degree)
//! into the check layer; each check combines `alpha` information edges and
//! consecutive accumulator states, so `M = E / alpha` for `E` information
//! edges and the design rate is `1 / (q + avg_degree / alpha)`.

mod decoder;
mod exit;
mod graph;

pub use decoder::{app_decode, extrinsic_variance, DecodeOutput};
pub use exit::{
    decoder_exit_trace, detector_transfer_large_system, exit_trajectory, find_threshold,
    j_function, j_inverse, DecoderCurve, ExitPoint, LargeSystemTransfer, ThresholdOptions,
    TrajectoryOutcome,
};
pub use graph::{build_code, encode, CodeGraph, Interleaver};

use crate::{Error, Result};

/// Per-bit log-likelihood ratios (positive favors bit 0 / symbol +1).
pub type LlrBlock = Vec<f64>;

/// Parameters of a repetition-aided IRA ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeEnsemble {
    /// Edge-perspective degree profile: `(degree, edge fraction)`, ascending.
    pub lambda: Vec<(usize, f64)>,
    /// Repetition factor (transmitted copies of each information bit).
    pub q: usize,
    /// Information edges combined per check.
    pub alpha: usize,
    /// Nominal user code rate (information bits per channel bit).
    pub rate_u: f64,
    /// Target codeword length.
    pub n: usize,
}

impl CodeEnsemble {
    pub fn new(
        lambda: Vec<(usize, f64)>,
        q: usize,
        alpha: usize,
        rate_u: f64,
        n: usize,
    ) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Invalid("degree profile must be nonempty".into()));
        }
        let mut sorted = lambda;
        sorted.sort_by_key(|&(d, _)| d);
        if sorted.iter().any(|&(d, f)| d < 1 || !(f > 0.0) || !f.is_finite()) {
            return Err(Error::Invalid("degrees must be >= 1 with positive fractions".into()));
        }
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Invalid("duplicate degree in profile".into()));
        }
        let total: f64 = sorted.iter().map(|&(_, f)| f).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid(format!(
                "edge fractions must sum to 1 (got {total})"
            )));
        }
        if q < 1 || alpha < 1 {
            return Err(Error::Invalid("q and alpha must be at least 1".into()));
        }
        if !(rate_u > 0.0 && rate_u < 1.0) {
            return Err(Error::Invalid("rate must lie in (0, 1)".into()));
        }
        if n < 16 {
            return Err(Error::Invalid("codeword length too short".into()));
        }
        Ok(Self { lambda: sorted, q, alpha, rate_u, n })
    }

    /// Average information-node degree `1 / sum(lambda_d / d)`.
    pub fn avg_degree(&self) -> f64 {
        1.0 / self.lambda.iter().map(|&(d, f)| f / d as f64).sum::<f64>()
    }

    /// Node-perspective degree fractions.
    pub fn node_fractions(&self) -> Vec<(usize, f64)> {
        let z: f64 = self.lambda.iter().map(|&(d, f)| f / d as f64).sum();
        self.lambda.iter().map(|&(d, f)| (d, f / (d as f64 * z))).collect()
    }

    /// The rate implied by the profile: `1 / (q + avg_degree / alpha)`.
    pub fn design_rate(&self) -> f64 {
        1.0 / (self.q as f64 + self.avg_degree() / self.alpha as f64)
    }

    /// A shortened copy of the ensemble at a different block length.
    pub fn with_length(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// Parses the flat key-value profile format (`#` comments allowed):
    ///
    /// ```text
    /// q 1
    /// alpha 2
    /// rate_u 0.1
    /// n 40960
    /// lambda 3 0.087105
    /// lambda 10 0.138217
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut q = None;
        let mut alpha = None;
        let mut rate_u = None;
        let mut n = None;
        let mut lambda = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap();
            let mut val = || -> Result<f64> {
                it.next()
                    .ok_or(Error::Parse { line: lineno + 1, msg: format!("`{key}` needs a value") })?
                    .parse()
                    .map_err(|_| Error::Parse { line: lineno + 1, msg: format!("bad number for `{key}`") })
            };
            match key {
                "q" => q = Some(val()? as usize),
                "alpha" => alpha = Some(val()? as usize),
                "rate_u" => rate_u = Some(val()?),
                "n" => n = Some(val()? as usize),
                // informational keys tolerated in profile files
                "beta" | "n_u" | "n_r" => {
                    val()?;
                }
                "lambda" => {
                    let d = val()? as usize;
                    let f = val()?;
                    lambda.push((d, f));
                }
                other => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        let missing = |k: &str| Error::Parse { line: 0, msg: format!("missing key `{k}`") };
        Self::new(
            lambda,
            q.ok_or_else(|| missing("q"))?,
            alpha.ok_or_else(|| missing("alpha"))?,
            rate_u.ok_or_else(|| missing("rate_u"))?,
            n.ok_or_else(|| missing("n"))?,
        )
    }

    /// Serializes to the flat key-value profile format.
    pub fn format(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("q {}\nalpha {}\nrate_u {}\nn {}\n", self.q, self.alpha, self.rate_u, self.n));
        for &(d, f) in &self.lambda {
            out.push_str(&format!("lambda {d} {f}\n"));
        }
        out
    }
}

/// Bundled optimized profiles for channel loads 0.5, 1, 2 and 3
/// (users/antenna), all at user rate 0.1 and length 40960.
pub mod presets {
    use super::CodeEnsemble;

    fn build(lambda: &[(usize, f64)], q: usize) -> CodeEnsemble {
        CodeEnsemble::new(lambda.to_vec(), q, 2, 0.1, 40960).expect("preset profile is valid")
    }

    /// Load 0.5: 8 users, 16 antennas.
    pub fn load_half() -> CodeEnsemble {
        build(
            &[(3, 0.087105), (10, 0.138217), (30, 0.207022), (80, 0.068682), (100, 0.498975)],
            1,
        )
    }

    /// Load 1: 16 users, 16 antennas.
    pub fn load_one() -> CodeEnsemble {
        build(
            &[(3, 0.1016), (10, 0.138386), (30, 0.262982), (80, 0.114347), (100, 0.382685)],
            2,
        )
    }

    /// Load 2: 16 users, 8 antennas.
    pub fn load_two() -> CodeEnsemble {
        build(
            &[(3, 0.107994), (10, 0.129009), (30, 0.219708), (80, 0.141601), (100, 0.401687)],
            2,
        )
    }

    /// Load 3: 24 users, 8 antennas.
    pub fn load_three() -> CodeEnsemble {
        build(
            &[(3, 0.116863), (10, 0.127289), (30, 0.159387), (80, 0.234121), (100, 0.36234)],
            2,
        )
    }

    /// The pre-existing multiple-access baseline profile (rate 0.08).
    pub fn mac_baseline() -> CodeEnsemble {
        CodeEnsemble::new(
            vec![(2, 0.063021), (3, 0.228288), (10, 0.111951), (30, 0.226877), (50, 0.369864)],
            5,
            1,
            0.08,
            40960,
        )
        .expect("baseline profile is valid")
    }

    /// The single-user baseline profile (rate 0.1).
    pub fn single_user_baseline() -> CodeEnsemble {
        CodeEnsemble::new(
            vec![(3, 0.085867), (10, 0.132226), (30, 0.198883), (80, 0.276011), (100, 0.307013)],
            1,
            2,
            0.1,
            40960,
        )
        .expect("baseline profile is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_design_rates_match_nominal() {
        for (ens, tol) in [
            (presets::load_half(), 0.01),
            (presets::load_one(), 0.01),
            (presets::load_two(), 0.01),
            (presets::load_three(), 0.014),
            (presets::mac_baseline(), 0.01),
            (presets::single_user_baseline(), 0.01),
        ] {
            let dr = ens.design_rate();
            assert!(
                (dr - ens.rate_u).abs() / ens.rate_u < tol,
                "design rate {dr} vs nominal {}",
                ens.rate_u
            );
        }
    }

    #[test]
    fn profile_text_round_trip() {
        let ens = presets::load_three();
        let parsed = CodeEnsemble::parse(&ens.format()).unwrap();
        assert_eq!(ens, parsed);
    }

    #[test]
    fn parse_rejects_bad_profiles() {
        assert!(CodeEnsemble::parse("q 1\nalpha 2\nrate_u 0.1\nn 1024\n").is_err());
        assert!(CodeEnsemble::parse("q 1\nalpha 2\nrate_u 0.1\nn 1024\nlambda 3 0.5\n").is_err());
        assert!(CodeEnsemble::parse("bogus 3\n").is_err());
        // fractions must sum to one
        let bad = "q 1\nalpha 2\nrate_u 0.1\nn 1024\nlambda 3 0.6\nlambda 10 0.6\n";
        assert!(CodeEnsemble::parse(bad).is_err());
    }
}
