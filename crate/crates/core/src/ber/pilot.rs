//! Pilot-aided channel estimation over a multicarrier block.
//!
//! Each trial draws a multipath channel, sends known pilots on every
//! `pilot_spacing`-th subcarrier and Gray-mapped QPSK elsewhere, estimates the
//! frequency response, equalises by division and counts data bit errors.
//! Symbols have unit energy and the channel unit average power, so the noise
//! variance per subcarrier is `1 / SNR`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{BerEstimate, BerMethod};
use crate::des::{rng_stream, RngStream};

/// Below this many bit errors the standard error is not trustworthy.
const MIN_ERRORS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationMethod {
    /// Per-pilot division, linear interpolation between pilots.
    Ls,
    /// LS at the pilots smoothed by the Wiener filter built from the known
    /// channel correlation and noise variance.
    Mmse,
    /// Perfect channel knowledge.
    Ideal,
}

impl EstimationMethod {
    pub fn ber_method(self) -> BerMethod {
        match self {
            EstimationMethod::Ls => BerMethod::LsPilot,
            EstimationMethod::Mmse => BerMethod::MmsePilot,
            EstimationMethod::Ideal => BerMethod::IdealPilot,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotChannelSpec {
    pub num_subcarriers: usize,
    pub pilot_spacing: usize,
    /// Power delay profile, one entry per tap; normalised to unit sum.
    pub tap_powers: Vec<f64>,
    /// Draw complex Gaussian tap gains each trial instead of fixed real gains.
    pub rayleigh: bool,
}

impl Default for PilotChannelSpec {
    /// 64 subcarriers, a pilot every 4th, three exponentially decaying taps.
    fn default() -> Self {
        PilotChannelSpec {
            num_subcarriers: 64,
            pilot_spacing: 4,
            tap_powers: vec![1.0, (-1.0f64).exp(), (-2.0f64).exp()],
            rayleigh: true,
        }
    }
}

impl PilotChannelSpec {
    /// Single unit tap without fading.
    pub fn flat() -> Self {
        PilotChannelSpec {
            tap_powers: vec![1.0],
            rayleigh: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.num_subcarriers == 0 || self.pilot_spacing == 0 {
            return Err("subcarrier count and pilot spacing must be positive".into());
        }
        if self.num_subcarriers % self.pilot_spacing != 0 {
            return Err(format!(
                "pilot spacing {} does not divide {} subcarriers",
                self.pilot_spacing, self.num_subcarriers
            ));
        }
        if self.pilot_spacing < 2 {
            return Err("pilot spacing must leave room for data subcarriers".into());
        }
        if self.tap_powers.is_empty() || self.tap_powers.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err("tap powers must be non-negative and finite".into());
        }
        if self.tap_powers.iter().sum::<f64>() <= 0.0 {
            return Err("tap powers sum to zero".into());
        }
        if self.tap_powers.len() > self.num_subcarriers {
            return Err("more taps than subcarriers".into());
        }
        Ok(())
    }

    fn normalised_powers(&self) -> Vec<f64> {
        let total: f64 = self.tap_powers.iter().sum();
        self.tap_powers.iter().map(|p| p / total).collect()
    }

    fn pilots(&self) -> Vec<usize> {
        (0..self.num_subcarriers).step_by(self.pilot_spacing).collect()
    }

    /// Frequency correlation `E[H_k conj(H_j)] = sum_l p_l exp(-i 2 pi (k - j) l / N)`.
    fn correlation(&self, powers: &[f64], k: usize, j: usize) -> Complex64 {
        let n = self.num_subcarriers as f64;
        let dk = k as f64 - j as f64;
        powers
            .iter()
            .enumerate()
            .map(|(l, p)| Complex64::from_polar(*p, -2.0 * PI * dk * l as f64 / n))
            .sum()
    }

    /// Wiener interpolation matrix `R_hp (R_pp + s2 I)^-1`, one row per subcarrier.
    fn wiener(&self, powers: &[f64], noise_var: f64) -> DMatrix<Complex64> {
        let pilots = self.pilots();
        let np = pilots.len();
        let r_pp = DMatrix::from_fn(np, np, |a, b| {
            self.correlation(powers, pilots[a], pilots[b]) + if a == b { Complex64::new(noise_var, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let r_hp = DMatrix::from_fn(self.num_subcarriers, np, |k, b| self.correlation(powers, k, pilots[b]));
        // The pseudo-inverse keeps near-noiseless, low-rank channels well behaved.
        let inv = r_pp.pseudo_inverse(1e-12).expect("svd of a hermitian matrix");
        r_hp * inv
    }
}

fn complex_normal(rng: &mut RngStream, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// LS estimates at the pilots, linearly interpolated; the response is
/// periodic over the band so the last gap wraps to the first pilot.
fn interpolate_linear(ls: &[Complex64], spacing: usize, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let i = k / spacing;
            let t = (k % spacing) as f64 / spacing as f64;
            let a = ls[i];
            let b = ls[(i + 1) % ls.len()];
            a * (1.0 - t) + b * t
        })
        .collect()
}

/// Monte Carlo QPSK bit error rate at `snr_db` after channel estimation.
///
/// Methods sharing a seed see identical channels and noise, so their
/// estimates are paired.
pub fn pilot_ber(
    spec: &PilotChannelSpec,
    method: EstimationMethod,
    snr_db: f64,
    trials: u64,
    seed: u64,
) -> Result<BerEstimate, String> {
    spec.validate()?;
    if trials == 0 {
        return Err("at least one trial is required".into());
    }
    let n = spec.num_subcarriers;
    let powers = spec.normalised_powers();
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let pilots = spec.pilots();
    let wiener = (method == EstimationMethod::Mmse).then(|| spec.wiener(&powers, noise_var));
    let data: Vec<usize> = (0..n).filter(|k| k % spec.pilot_spacing != 0).collect();
    let bits_per_trial = 2 * data.len() as u64;

    let mut rng = rng_stream(seed, 0x5EED_0000);
    let mut taps = vec![Complex64::new(0.0, 0.0); powers.len()];
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut bits = vec![(false, false); n];
    let (mut errors, mut sum_sq) = (0u64, 0.0f64);

    for _ in 0..trials {
        for (tap, p) in taps.iter_mut().zip(&powers) {
            *tap = if spec.rayleigh {
                complex_normal(&mut rng, *p)
            } else {
                Complex64::new(p.sqrt(), 0.0)
            };
        }
        for (k, hk) in h.iter_mut().enumerate() {
            *hk = taps
                .iter()
                .enumerate()
                .map(|(l, g)| g * Complex64::from_polar(1.0, -2.0 * PI * (k * l) as f64 / n as f64))
                .sum();
        }
        for k in 0..n {
            let x = if k % spec.pilot_spacing == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                let b = (rng.random::<bool>(), rng.random::<bool>());
                bits[k] = b;
                Complex64::new(
                    if b.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
                    if b.1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
                )
            };
            y[k] = h[k] * x + complex_normal(&mut rng, noise_var);
        }
        let ls: Vec<Complex64> = pilots.iter().map(|&k| y[k]).collect();
        let estimate: Vec<Complex64> = match method {
            EstimationMethod::Ideal => h.clone(),
            EstimationMethod::Ls => interpolate_linear(&ls, spec.pilot_spacing, n),
            EstimationMethod::Mmse => {
                let w = wiener.as_ref().expect("built for mmse");
                let v = nalgebra::DVector::from_vec(ls);
                (w * v).iter().copied().collect()
            }
        };
        let mut trial_errors = 0u64;
        for &k in &data {
            let z = y[k] / estimate[k];
            let decided = (z.re < 0.0, z.im < 0.0);
            trial_errors += u64::from(decided.0 != bits[k].0) + u64::from(decided.1 != bits[k].1);
        }
        errors += trial_errors;
        let r = trial_errors as f64 / bits_per_trial as f64;
        sum_sq += r * r;
    }

    let total_bits = bits_per_trial * trials;
    let ber = errors as f64 / total_bits as f64;
    let t = trials as f64;
    let variance = if trials > 1 {
        ((sum_sq - t * ber * ber) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    let warning = (errors < MIN_ERRORS).then(|| {
        format!("only {errors} bit errors observed; increase trials for a reliable estimate")
    });
    Ok(BerEstimate {
        ber: ber.clamp(0.0, 1.0),
        method: method.ber_method(),
        std_error: (variance / t).sqrt(),
        bit_errors: errors,
        bits: total_bits,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ber::analytic_ber;
    use crate::phy::Modulation;

    #[test]
    fn noiseless_identity_channel_is_error_free() {
        for method in [EstimationMethod::Ls, EstimationMethod::Mmse, EstimationMethod::Ideal] {
            let est = pilot_ber(&PilotChannelSpec::flat(), method, 200.0, 200, 1).unwrap();
            assert_eq!(est.bit_errors, 0, "{method:?}");
            assert!(est.warning.is_some());
        }
    }

    #[test]
    fn same_seed_same_answer() {
        let spec = PilotChannelSpec::default();
        let a = pilot_ber(&spec, EstimationMethod::Mmse, 5.0, 500, 9).unwrap();
        let b = pilot_ber(&spec, EstimationMethod::Mmse, 5.0, 500, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_ideal_matches_awgn_qpsk() {
        let snr = 4.0;
        let est = pilot_ber(&PilotChannelSpec::flat(), EstimationMethod::Ideal, snr, 20_000, 3).unwrap();
        let oracle = analytic_ber(Modulation::Qpsk, snr - 10.0 * 2f64.log10());
        assert!((est.ber - oracle).abs() < 3.0 * est.std_error, "{} vs {oracle} (se {})", est.ber, est.std_error);
    }

    #[test]
    fn wiener_matches_truth_without_noise_on_pilots() {
        // With negligible noise the Wiener filter reproduces the channel exactly
        // (the 3-tap response lies in the span of the pilot correlations).
        let spec = PilotChannelSpec::default();
        let est = pilot_ber(&spec, EstimationMethod::Mmse, 80.0, 300, 4).unwrap();
        assert_eq!(est.bit_errors, 0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = PilotChannelSpec::default();
        spec.pilot_spacing = 5;
        assert!(pilot_ber(&spec, EstimationMethod::Ls, 5.0, 10, 1).is_err());
        assert!(pilot_ber(&PilotChannelSpec::default(), EstimationMethod::Ls, 5.0, 0, 1).is_err());
    }
}
