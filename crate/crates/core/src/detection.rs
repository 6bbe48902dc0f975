//! Deterministic detection models: balanced homodyne detection with a TEM10
//! local oscillator, split detection, and the detector-saturation comparison.
//!
//! All formulas are ideal and shot-noise limited; real-world degradation is
//! handled by the lumped efficiency in [`crate::lab_experiment`].
//!
//! The vacuum-normalized difference photocurrent of the homodyne reads
//!
//! ```text
//! N_- = sqrt(N_LO) * (2 sqrt(N') A_w k w0 + dX)
//! ```
//!
//! with `N'` the dark-port photon number and `dX` the unit-variance quadrature
//! noise of coherent light. The common `sqrt(N_LO)` gain multiplies signal and
//! noise identically, so it is reported but excluded from the SNR. Using
//! `N' = N sin^2(phi/2)` and `|A_w| = cot(phi/2)` the SNR becomes
//!
//! ```text
//! SNR = (2 sqrt(N) cos(phi/2) k w0)^2
//! ```
//!
//! and the minimum measurable tilt (the tilt at SNR = 1) is
//! `theta_min = lambda / (4 pi w0 sqrt(N) cos(phi/2))`. Split detection is
//! 2/pi efficient relative to the TEM10 homodyne, so its SNR carries a 2/pi
//! prefactor and its minimum tilt a sqrt(pi/2) penalty. Quantities with a
//! finite dark-port limit `phi -> 0` are evaluated through `cos(phi/2)`,
//! never through the diverging weak value.

use thiserror::Error;

use crate::hg_modes::BeamGeometry;
use crate::weak_measurement::{weak_value, InterferometerSetting, TiltKick, WeakMeasurementError};

/// Warn when the local oscillator is not at least this many times brighter
/// than the signal.
pub const LO_STRENGTH_WARNING_RATIO: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error(transparent)]
    WeakValue(#[from] WeakMeasurementError),
    #[error("minimum measurable tilt diverges at phi = pi (cos(phi/2) = 0)")]
    DivergentMmt,
    #[error("photon numbers must be finite and non-negative: {0}")]
    InvalidBudget(String),
    #[error("noise variance must be positive and finite, got {0}")]
    InvalidNoise(f64),
    #[error("no post-selection probability in (0, 1] satisfies the saturation cap")]
    InfeasiblePostselection,
}

/// Mean photon numbers per measurement window across the detection chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonBudget {
    /// Photons injected into the bright port, `N`.
    n_injected: f64,
    /// Photons leaving the dark port, `N' = N sin^2(phi/2)`.
    n_signal: f64,
    /// Local-oscillator photons, `N_LO`.
    n_lo: f64,
    /// Photons detected by a conventional (no post-selection) scheme, `N''`.
    n_conventional: Option<f64>,
    /// Detector saturation photon number, if limited.
    n_saturation: Option<f64>,
}

impl PhotonBudget {
    pub fn new(n_injected: f64, n_signal: f64, n_lo: f64) -> Result<Self, DetectionError> {
        for (name, v) in [
            ("n_injected", n_injected),
            ("n_signal", n_signal),
            ("n_lo", n_lo),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DetectionError::InvalidBudget(format!("{name} = {v}")));
            }
        }
        Ok(Self {
            n_injected,
            n_signal,
            n_lo,
            n_conventional: None,
            n_saturation: None,
        })
    }

    /// Budget whose dark-port photon number follows from the interferometer
    /// setting: `N' = N sin^2(phi/2)`.
    pub fn from_setting(
        n_injected: f64,
        setting: &InterferometerSetting,
        n_lo: f64,
    ) -> Result<Self, DetectionError> {
        Self::new(
            n_injected,
            n_injected * setting.postselection_probability(),
            n_lo,
        )
    }

    pub fn with_conventional(mut self, n: f64) -> Self {
        self.n_conventional = Some(n);
        self
    }

    pub fn with_saturation(mut self, n: f64) -> Self {
        self.n_saturation = Some(n);
        self
    }

    pub fn n_injected(&self) -> f64 {
        self.n_injected
    }

    pub fn n_signal(&self) -> f64 {
        self.n_signal
    }

    pub fn n_lo(&self) -> f64 {
        self.n_lo
    }

    pub fn n_conventional(&self) -> Option<f64> {
        self.n_conventional
    }

    pub fn n_saturation(&self) -> Option<f64> {
        self.n_saturation
    }

    /// The homodyne linearization assumes a local oscillator much brighter
    /// than the signal; false once `N_LO < 100 N'`.
    pub fn lo_much_stronger_than_signal(&self) -> bool {
        self.n_lo >= LO_STRENGTH_WARNING_RATIO * self.n_signal
    }
}

/// Vacuum-normalized quadrature noise variance; 1 for coherent or vacuum
/// input. Squeezed input is accepted as a smaller variance, nothing more.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseQuadrature {
    variance: f64,
}

impl NoiseQuadrature {
    pub fn new(variance: f64) -> Result<Self, DetectionError> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(DetectionError::InvalidNoise(variance));
        }
        Ok(Self { variance })
    }

    /// Coherent / vacuum noise: unit variance.
    pub fn vacuum() -> Self {
        Self { variance: 1.0 }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Mean, variance and SNR of a difference photocurrent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    pub signal_mean: f64,
    pub noise_variance: f64,
    pub snr: f64,
}

impl DetectionOutcome {
    pub fn new(signal_mean: f64, noise_variance: f64) -> Self {
        Self {
            signal_mean,
            noise_variance,
            snr: signal_mean * signal_mean / noise_variance,
        }
    }
}

/// A homodyne outcome plus the common local-oscillator gain, which cancels in
/// the SNR and is reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BhdOutcome {
    pub outcome: DetectionOutcome,
    /// `sqrt(N_LO)`.
    pub lo_gain: f64,
}

/// Balanced homodyne outcome in the `N'`/`A_w` formulation:
/// `signal = 2 sqrt(N') |A_w| k w0`, noise from the supplied quadrature.
pub fn bhd_outcome(
    budget: &PhotonBudget,
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
    noise: &NoiseQuadrature,
) -> Result<BhdOutcome, DetectionError> {
    let a_w = weak_value(setting)?;
    let signal_mean =
        2.0 * budget.n_signal().sqrt() * a_w.norm() * kick.momentum_kick() * geometry.waist();
    Ok(BhdOutcome {
        outcome: DetectionOutcome::new(signal_mean, noise.variance()),
        lo_gain: budget.n_lo().sqrt(),
    })
}

/// Coherent-light homodyne SNR in the injected-photon formulation:
/// `(2 sqrt(N) cos(phi/2) k w0)^2`.
pub fn snr_bhd(
    n_injected: f64,
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
) -> f64 {
    let amplitude = 2.0
        * n_injected.sqrt()
        * (0.5 * setting.phi()).cos()
        * kick.momentum_kick()
        * geometry.waist();
    amplitude * amplitude
}

/// [`snr_bhd`] in the fully dark limit `phi -> 0` (`cos(phi/2) -> 1`).
pub fn snr_bhd_limit(n_injected: f64, kick: &TiltKick, geometry: &BeamGeometry) -> f64 {
    let amplitude = 2.0 * n_injected.sqrt() * kick.momentum_kick() * geometry.waist();
    amplitude * amplitude
}

/// Minimum measurable tilt of the homodyne scheme, the tilt at SNR = 1:
/// `lambda / (4 pi w0 sqrt(N) cos(phi/2))`.
pub fn mmt_bhd(
    n_injected: f64,
    setting: &InterferometerSetting,
    geometry: &BeamGeometry,
) -> Result<f64, DetectionError> {
    if setting.phi() == std::f64::consts::PI {
        return Err(DetectionError::DivergentMmt);
    }
    Ok(mmt_bhd_limit(n_injected, geometry) / (0.5 * setting.phi()).cos())
}

/// [`mmt_bhd`] in the fully dark limit `phi -> 0`.
pub fn mmt_bhd_limit(n_injected: f64, geometry: &BeamGeometry) -> f64 {
    geometry.wavelength()
        / (4.0 * std::f64::consts::PI * geometry.waist() * n_injected.sqrt())
}

/// Split-detection SNR: 2/pi of the homodyne value.
pub fn snr_sd(
    n_injected: f64,
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
) -> f64 {
    (2.0 / std::f64::consts::PI) * snr_bhd(n_injected, setting, kick, geometry)
}

/// [`snr_sd`] in the fully dark limit.
pub fn snr_sd_limit(n_injected: f64, kick: &TiltKick, geometry: &BeamGeometry) -> f64 {
    (2.0 / std::f64::consts::PI) * snr_bhd_limit(n_injected, kick, geometry)
}

/// Split-detection minimum measurable tilt: sqrt(pi/2) times the homodyne
/// value.
pub fn mmt_sd(
    n_injected: f64,
    setting: &InterferometerSetting,
    geometry: &BeamGeometry,
) -> Result<f64, DetectionError> {
    Ok((std::f64::consts::PI / 2.0).sqrt() * mmt_bhd(n_injected, setting, geometry)?)
}

/// [`mmt_sd`] in the fully dark limit.
pub fn mmt_sd_limit(n_injected: f64, geometry: &BeamGeometry) -> f64 {
    (std::f64::consts::PI / 2.0).sqrt() * mmt_bhd_limit(n_injected, geometry)
}

/// Outcome of the detector-saturation comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationGain {
    /// SNR advantage of post-selected detection over a conventional scheme
    /// whose detector caps the usable photon number.
    pub gain: f64,
    /// Largest post-selection probability that keeps the detected photons
    /// within saturation, `min(N_sat / N, 1)`.
    pub max_postselection: f64,
    /// True when post-selection is actually required (`N > N_sat`).
    pub constrained: bool,
}

/// SNR advantage of the post-selected scheme over a saturation-capped
/// conventional scheme.
///
/// The post-selected signal scales with the injected `N` while only
/// `N' = N P_m <= N_sat` photons reach the detector, so choosing
/// `P_m <= N_sat / N` yields a gain of `N / N_sat` over a conventional
/// measurement stuck at `N'' = N_sat`. Without excess power (`N <= N_sat`)
/// there is nothing to gain.
pub fn saturation_gain(n_injected: f64, n_saturation: f64) -> Result<SaturationGain, DetectionError> {
    if !(n_saturation > 0.0 && n_saturation.is_finite()) {
        return Err(DetectionError::InvalidBudget(format!(
            "n_saturation = {n_saturation}"
        )));
    }
    if !(n_injected > 0.0 && n_injected.is_finite()) {
        return Err(DetectionError::InvalidBudget(format!(
            "n_injected = {n_injected}"
        )));
    }
    let max_postselection = (n_saturation / n_injected).min(1.0);
    // Mathematically always positive; guards the subnormal/underflow corner.
    if !(max_postselection > 0.0) {
        return Err(DetectionError::InfeasiblePostselection);
    }
    let constrained = n_injected > n_saturation;
    let gain = if constrained {
        n_injected / n_saturation
    } else {
        1.0
    };
    Ok(SaturationGain {
        gain,
        max_postselection,
        constrained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn geometry() -> BeamGeometry {
        BeamGeometry::new(1.064e-6, 60e-6).unwrap()
    }

    const FIG_N: f64 = 5.35265e11;

    #[test]
    fn bhd_outcome_zero_kick() {
        let g = geometry();
        let s = InterferometerSetting::new(0.5).unwrap();
        let budget = PhotonBudget::from_setting(1e11, &s, 1e14).unwrap();
        let out = bhd_outcome(&budget, &s, &TiltKick::zero(), &g, &NoiseQuadrature::vacuum())
            .unwrap();
        assert_eq!(out.outcome.signal_mean, 0.0);
        assert_eq!(out.outcome.snr, 0.0);
        assert_relative_eq!(out.lo_gain, 1e7, max_relative = 1e-12);
    }

    #[test]
    fn snr_is_mean_squared_over_variance() {
        let out = DetectionOutcome::new(1.0, 1.0);
        assert_eq!(out.snr, 1.0);
        let out = DetectionOutcome::new(3.0, 2.0);
        assert_relative_eq!(out.snr, 4.5, max_relative = 1e-15);
    }

    #[test]
    fn budget_from_setting_is_consistent() {
        let s = InterferometerSetting::new(0.3636).unwrap();
        let budget = PhotonBudget::from_setting(1e12, &s, 1e15).unwrap();
        assert_relative_eq!(
            budget.n_signal(),
            1e12 * s.postselection_probability(),
            max_relative = 1e-9
        );
        assert!(budget.lo_much_stronger_than_signal());

        let dim_lo = PhotonBudget::new(1e12, 1e10, 1e11).unwrap();
        assert!(!dim_lo.lo_much_stronger_than_signal());
    }

    #[test]
    fn the_two_snr_formulations_agree() {
        // 2 sqrt(N') |A_w| k w0 must equal 2 sqrt(N) cos(phi/2) k w0:
        // sqrt(N sin^2) cot = sqrt(N) cos.
        let g = geometry();
        for i in 1..=30 {
            let phi = 3.1 * i as f64 / 30.0;
            let s = InterferometerSetting::new(phi).unwrap();
            let kick = TiltKick::from_momentum_kick(5e-4 / g.waist(), &g).unwrap();
            let budget = PhotonBudget::from_setting(FIG_N, &s, 1e15).unwrap();
            let via_signal = bhd_outcome(&budget, &s, &kick, &g, &NoiseQuadrature::vacuum())
                .unwrap()
                .outcome
                .snr;
            let via_injected = snr_bhd(FIG_N, &s, &kick, &g);
            assert_relative_eq!(via_signal, via_injected, max_relative = 1e-9);
        }
    }

    #[test]
    fn snr_reaches_one_at_the_reference_tilt() {
        let g = geometry();
        let kick = TiltKick::from_tilt(1.929e-9, &g).unwrap();
        let snr = snr_bhd_limit(FIG_N, &kick, &g);
        assert_relative_eq!(snr, 1.0, max_relative = 2e-3);
    }

    #[test]
    fn snr_scales_quadratically_with_kick() {
        let g = geometry();
        let s = InterferometerSetting::new(0.5).unwrap();
        let kick = TiltKick::from_momentum_kick(1e-3 / g.waist(), &g).unwrap();
        let double = TiltKick::from_momentum_kick(2e-3 / g.waist(), &g).unwrap();
        assert_relative_eq!(
            snr_bhd(FIG_N, &s, &double, &g),
            4.0 * snr_bhd(FIG_N, &s, &kick, &g),
            max_relative = 1e-12
        );
        assert_eq!(snr_bhd(FIG_N, &s, &TiltKick::zero(), &g), 0.0);
    }

    #[test]
    fn mmt_reference_values() {
        let g = geometry();
        assert_relative_eq!(mmt_bhd_limit(FIG_N, &g), 1.92877e-9, max_relative = 1e-4);

        let s = InterferometerSetting::from_postselection_probability(0.033).unwrap();
        assert_relative_eq!(
            mmt_bhd(FIG_N, &s, &g).unwrap(),
            1.96140e-9,
            max_relative = 1e-4
        );

        assert_relative_eq!(mmt_sd_limit(FIG_N, &g), 2.41737e-9, max_relative = 1e-4);
    }

    #[test]
    fn mmt_scales_inverse_sqrt_of_photons() {
        let g = geometry();
        assert_relative_eq!(
            mmt_bhd_limit(4.0 * FIG_N, &g),
            0.5 * mmt_bhd_limit(FIG_N, &g),
            max_relative = 1e-12
        );
    }

    #[test]
    fn mmt_diverges_at_pi() {
        let g = geometry();
        let s = InterferometerSetting::new(std::f64::consts::PI).unwrap();
        assert_eq!(mmt_bhd(FIG_N, &s, &g), Err(DetectionError::DivergentMmt));
        assert_eq!(mmt_sd(FIG_N, &s, &g), Err(DetectionError::DivergentMmt));
    }

    #[test]
    fn split_detection_ratios_are_constants() {
        let g = geometry();
        let kick = TiltKick::from_momentum_kick(1e-2 / g.waist(), &g).unwrap();
        for i in 1..=25 {
            let phi = 3.0 * i as f64 / 25.0;
            let s = InterferometerSetting::new(phi).unwrap();
            let ratio = snr_sd(FIG_N, &s, &kick, &g) / snr_bhd(FIG_N, &s, &kick, &g);
            assert_abs_diff_eq!(ratio, 2.0 / std::f64::consts::PI, epsilon = 1e-12);
            let mmt_ratio = mmt_sd(FIG_N, &s, &g).unwrap() / mmt_bhd(FIG_N, &s, &g).unwrap();
            assert_abs_diff_eq!(
                mmt_ratio,
                (std::f64::consts::PI / 2.0).sqrt(),
                epsilon = 1e-12
            );
        }
        // 2/pi is the quoted 64% split-detection efficiency.
        assert_relative_eq!(2.0 / std::f64::consts::PI, 0.6366, max_relative = 1e-3);
    }

    #[test]
    fn saturation_gain_examples() {
        let g = saturation_gain(1e10, 1e10).unwrap();
        assert_eq!(g.gain, 1.0);
        assert!(!g.constrained);
        assert_eq!(g.max_postselection, 1.0);

        let g = saturation_gain(1e12, 1e10).unwrap();
        assert_relative_eq!(g.gain, 100.0, max_relative = 1e-12);
        assert!(g.constrained);
        assert_relative_eq!(g.max_postselection, 0.01, max_relative = 1e-12);

        assert!(saturation_gain(1e10, 0.0).is_err());
        assert!(saturation_gain(1e10, -1.0).is_err());
    }

    #[test]
    fn saturation_gain_tracks_fixed_detected_power() {
        // Raising the input while the detected output stays pinned raises
        // the advantage proportionally.
        let n_sat = 1e9;
        let low = saturation_gain(2e10, n_sat).unwrap();
        let high = saturation_gain(3.2e11, n_sat).unwrap();
        assert!(high.gain > low.gain);
        assert_relative_eq!(high.gain / low.gain, 16.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn snr_decreases_and_mmt_increases_with_postselection(
            n in 1e9f64..1e13,
            pm_lo in 0.01f64..0.98,
            step in 0.001f64..0.02,
        ) {
            let g = BeamGeometry::new(1.064e-6, 60e-6).unwrap();
            let kick = TiltKick::from_momentum_kick(1e-3 / g.waist(), &g).unwrap();
            let lo = InterferometerSetting::from_postselection_probability(pm_lo).unwrap();
            let hi = InterferometerSetting::from_postselection_probability(pm_lo + step).unwrap();
            prop_assert!(snr_bhd(n, &hi, &kick, &g) < snr_bhd(n, &lo, &kick, &g));
            prop_assert!(mmt_bhd(n, &hi, &g).unwrap() > mmt_bhd(n, &lo, &g).unwrap());
        }

        #[test]
        fn snr_is_one_at_the_minimum_measurable_tilt(
            n in 1e8f64..1e14,
            pm in 1e-4f64..0.999,
        ) {
            let g = BeamGeometry::new(1.064e-6, 60e-6).unwrap();
            let s = InterferometerSetting::from_postselection_probability(pm).unwrap();
            let theta = mmt_bhd(n, &s, &g).unwrap();
            let kick = TiltKick::from_tilt(theta, &g).unwrap();
            let snr = snr_bhd(n, &s, &kick, &g);
            prop_assert!((snr - 1.0).abs() <= 1e-12);
        }
    }
}
