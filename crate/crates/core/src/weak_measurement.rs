//! The Sagnac weak-value pipeline: pre-selection, weak tilt interaction,
//! post-selection.
//!
//! The two counter-propagating paths form the system, `|+⟩` clockwise and
//! `|-⟩` counterclockwise. Pre-selection prepares
//! `(e^{-i phi/2}|+⟩ + e^{i phi/2}|-⟩)/√2`; the tilting mirror applies the
//! path-conditioned momentum kick `exp(-i Â k x̂)` with `Â = |+⟩⟨+| - |-⟩⟨-|`;
//! the dark port projects onto `(|+⟩ - |-⟩)/√2`. The weak value
//! `A_w = ⟨f|Â|i⟩ / ⟨f|i⟩ = i cot(phi/2)` diverges as the port darkens,
//! amplifying the kick.
//!
//! Both routes to the dark-port pointer are provided: the exact interference
//! field `E(x) ∝ sin(phi/2 + kx) psi_0(x)` (the interaction exponential kept
//! to all orders) and the first-order weak-value form
//! `psi_0 - i (w0 A_w k / 2) psi_1`. Overall phases are not observable and
//! carry no guarantees; only moduli and probabilities do.

use num_complex::Complex64;
use thiserror::Error;

use crate::hg_modes::{
    self, BeamGeometry, FieldError, ModeCoefficients, SampledField,
    MIN_GRID_HALF_SPAN_WAISTS,
};

/// Phases below this floor make the weak value numerically meaningless.
pub const DEFAULT_PHASE_FLOOR: f64 = 1e-9;
/// First-order pointer coefficients are flagged once `|A_w| k w0 / 2`
/// reaches this ratio.
pub const DEFAULT_WEAKNESS_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum WeakMeasurementError {
    #[error("relative phase must lie in (0, pi], got {0}")]
    InvalidPhase(f64),
    #[error("post-selection probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("relative phase {0:e} rad is below the {DEFAULT_PHASE_FLOOR:e} rad floor; the weak value diverges")]
    SingularPhase(f64),
    #[error("tilt and momentum kick must be finite")]
    InvalidKick,
}

/// Relative Sagnac phase between the clockwise and counterclockwise paths.
///
/// `phi = 0` is the singular point of the weak value and is rejected;
/// quantities with a finite `phi -> 0` limit are exposed as dedicated
/// operations in [`crate::detection`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerSetting {
    phi: f64,
}

impl InterferometerSetting {
    pub fn new(phi: f64) -> Result<Self, WeakMeasurementError> {
        if !(phi > 0.0 && phi <= std::f64::consts::PI) {
            return Err(WeakMeasurementError::InvalidPhase(phi));
        }
        Ok(Self { phi })
    }

    /// Setting whose dark port passes the fraction `p_m` of the injected
    /// light: `phi = 2 asin(sqrt(p_m))`.
    pub fn from_postselection_probability(p_m: f64) -> Result<Self, WeakMeasurementError> {
        if !(p_m > 0.0 && p_m <= 1.0) {
            return Err(WeakMeasurementError::InvalidProbability(p_m));
        }
        Self::new(2.0 * p_m.sqrt().asin())
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `sin^2(phi/2)`, the fraction of injected power that survives
    /// post-selection.
    pub fn postselection_probability(&self) -> f64 {
        let s = (0.5 * self.phi).sin();
        s * s
    }
}

/// A mirror tilt and its equivalent transverse momentum kick,
/// `k = 2 pi theta / lambda`. The two stay mutually consistent by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltKick {
    theta: f64,
    k: f64,
}

impl TiltKick {
    pub fn from_tilt(theta: f64, geometry: &BeamGeometry) -> Result<Self, WeakMeasurementError> {
        if !theta.is_finite() {
            return Err(WeakMeasurementError::InvalidKick);
        }
        Ok(Self {
            theta,
            k: 2.0 * std::f64::consts::PI * theta / geometry.wavelength(),
        })
    }

    pub fn from_momentum_kick(k: f64, geometry: &BeamGeometry) -> Result<Self, WeakMeasurementError> {
        if !k.is_finite() {
            return Err(WeakMeasurementError::InvalidKick);
        }
        Ok(Self {
            theta: k * geometry.wavelength() / (2.0 * std::f64::consts::PI),
            k,
        })
    }

    pub fn zero() -> Self {
        Self { theta: 0.0, k: 0.0 }
    }

    /// Mirror-induced beam tilt in radians.
    pub fn tilt(&self) -> f64 {
        self.theta
    }

    /// Transverse momentum kick in rad/m.
    pub fn momentum_kick(&self) -> f64 {
        self.k
    }
}

/// Normalized two-path state on the `(|+⟩, |-⟩)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub amp_plus: Complex64,
    pub amp_minus: Complex64,
}

impl SystemState {
    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SystemState) -> Complex64 {
        self.amp_plus.conj() * other.amp_plus + self.amp_minus.conj() * other.amp_minus
    }

    pub fn norm_squared(&self) -> f64 {
        self.amp_plus.norm_sqr() + self.amp_minus.norm_sqr()
    }

    /// Applies the path operator `Â = |+⟩⟨+| - |-⟩⟨-|`.
    pub fn apply_path_operator(&self) -> SystemState {
        SystemState {
            amp_plus: self.amp_plus,
            amp_minus: -self.amp_minus,
        }
    }
}

/// The weak tilt interaction: a path-conditioned transverse momentum kick.
///
/// The time profile of the interaction integrates to one, so the effective
/// coupling equals the momentum kick itself; the path operator is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakInteraction {
    coupling: f64,
}

impl WeakInteraction {
    pub fn from_kick(kick: &TiltKick) -> Self {
        Self {
            coupling: kick.momentum_kick(),
        }
    }

    /// Effective per-pass momentum transfer in rad/m.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Evolves a path state at transverse position `x` under
    /// `exp(-i Â k x)`: opposite phase ramps on the two paths.
    pub fn evolve(&self, state: &SystemState, x: f64) -> SystemState {
        let phase = Complex64::cis(-self.coupling * x);
        SystemState {
            amp_plus: state.amp_plus * phase,
            amp_minus: state.amp_minus * phase.conj(),
        }
    }
}

/// The fixed dark-port projection `(|+⟩ - |-⟩)/√2`.
pub fn postselect_state() -> SystemState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    SystemState {
        amp_plus: Complex64::new(r, 0.0),
        amp_minus: Complex64::new(-r, 0.0),
    }
}

/// Pre-selected state `(e^{-i phi/2}|+⟩ + e^{i phi/2}|-⟩)/√2`.
pub fn preselect(setting: &InterferometerSetting) -> SystemState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let half = 0.5 * setting.phi();
    SystemState {
        amp_plus: Complex64::cis(-half) * r,
        amp_minus: Complex64::cis(half) * r,
    }
}

/// Weak value `A_w = ⟨f|Â|i⟩ / ⟨f|i⟩`, computed from the fixed dark-port
/// projection and the pre-selected state. Purely imaginary, `i cot(phi/2)`.
pub fn weak_value(setting: &InterferometerSetting) -> Result<Complex64, WeakMeasurementError> {
    if setting.phi() < DEFAULT_PHASE_FLOOR {
        return Err(WeakMeasurementError::SingularPhase(setting.phi()));
    }
    let initial = preselect(setting);
    let fin = postselect_state();
    let numerator = fin.inner(&initial.apply_path_operator());
    let denominator = fin.inner(&initial);
    Ok(numerator / denominator)
}

/// `P_m = |⟨f|i⟩|^2 = sin^2(phi/2)`.
pub fn postselection_probability(setting: &InterferometerSetting) -> f64 {
    setting.postselection_probability()
}

/// Exact dark-port field together with its exact post-selection probability.
#[derive(Debug, Clone)]
pub struct DarkPortField {
    /// Normalized dark-port field samples.
    pub field: SampledField,
    /// `∫ |E|^2 dx` of the raw interference field: the probability that an
    /// injected photon exits the dark port, all orders of the kick included.
    pub postselection_probability: f64,
}

/// Evaluates the dark-port interference field on `grid`, keeping the
/// interaction exponential exact: `E(x) ∝ sin(phi/2 + kx) psi_0(x)` up to a
/// global phase. The returned samples are normalized and the squared norm of
/// the raw field is reported as the exact post-selection probability.
pub fn dark_port_field(
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
    grid: &[f64],
) -> Result<DarkPortField, FieldError> {
    let initial = preselect(setting);
    let interaction = WeakInteraction::from_kick(kick);
    let fin = postselect_state();
    let mut field = SampledField::from_fn(grid, |x| {
        fin.inner(&interaction.evolve(&initial, x)) * hg_modes::mode_amplitude(0, x, geometry)
    })?;
    field.require_span(geometry, MIN_GRID_HALF_SPAN_WAISTS)?;
    let postselection_probability = field.normalize();
    Ok(DarkPortField {
        field,
        postselection_probability,
    })
}

/// First-order pointer coefficients with the weak-regime diagnostic.
#[derive(Debug, Clone)]
pub struct FirstOrderPointer {
    /// Normalized `(c_0, c_1)` from the first-order expansion.
    pub coefficients: ModeCoefficients,
    /// `|A_w| k w0 / 2`, the expansion parameter.
    pub weakness_ratio: f64,
    /// False once the expansion parameter exceeds the threshold; the
    /// first-order form is then not trustworthy.
    pub weak_regime: bool,
}

/// First-order pointer `psi_0 - i (w0 A_w k / 2) psi_1`, re-normalized.
///
/// With `A_w = i cot(phi/2)` the first-order ratio is real:
/// `c_1/c_0 = cot(phi/2) k w0 / 2`.
pub fn pointer_firstorder(
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
) -> Result<FirstOrderPointer, WeakMeasurementError> {
    pointer_firstorder_with_threshold(setting, kick, geometry, DEFAULT_WEAKNESS_THRESHOLD)
}

/// [`pointer_firstorder`] with a caller-chosen weak-regime threshold.
pub fn pointer_firstorder_with_threshold(
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
    weakness_threshold: f64,
) -> Result<FirstOrderPointer, WeakMeasurementError> {
    let a_w = weak_value(setting)?;
    let c1 = Complex64::new(0.0, -0.5 * geometry.waist() * kick.momentum_kick()) * a_w;
    let weakness_ratio = c1.norm();
    let mut coefficients = ModeCoefficients::new(vec![Complex64::new(1.0, 0.0), c1]);
    coefficients.normalize();
    Ok(FirstOrderPointer {
        coefficients,
        weakness_ratio,
        weak_regime: weakness_ratio < weakness_threshold,
    })
}

/// The amplified pointer observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifiedShift {
    /// `|A_w| k w0^2 / 2` in meters: the kick expressed as an effective
    /// transverse displacement after amplification.
    pub shift: f64,
    /// `|A_w| = cot(phi/2)`.
    pub amplification: f64,
}

/// Amplification factor and length-scaled pointer shift for a kick.
pub fn amplified_shift(
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
) -> Result<AmplifiedShift, WeakMeasurementError> {
    let amplification = weak_value(setting)?.norm();
    let w = geometry.waist();
    Ok(AmplifiedShift {
        shift: 0.5 * amplification * kick.momentum_kick() * w * w,
        amplification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hg_modes::{decompose_field, default_grid};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn geometry() -> BeamGeometry {
        BeamGeometry::new(1.064e-6, 60e-6).unwrap()
    }

    #[test]
    fn setting_rejects_out_of_range_phases() {
        assert!(InterferometerSetting::new(0.0).is_err());
        assert!(InterferometerSetting::new(-0.1).is_err());
        assert!(InterferometerSetting::new(std::f64::consts::PI + 1e-6).is_err());
        assert!(InterferometerSetting::new(std::f64::consts::PI).is_ok());
    }

    #[test]
    fn preselect_at_pi() {
        let s = InterferometerSetting::new(std::f64::consts::PI).unwrap();
        let state = preselect(&s);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((state.amp_plus - Complex64::new(0.0, -r)).norm() < 1e-15);
        assert!((state.amp_minus - Complex64::new(0.0, r)).norm() < 1e-15);
    }

    #[test]
    fn preselect_is_normalized_for_any_phase() {
        for i in 1..=100 {
            let phi = std::f64::consts::PI * i as f64 / 100.0;
            let s = InterferometerSetting::new(phi).unwrap();
            assert_abs_diff_eq!(preselect(&s).norm_squared(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn postselection_probability_examples() {
        let s = InterferometerSetting::new(std::f64::consts::PI).unwrap();
        assert_relative_eq!(postselection_probability(&s), 1.0, max_relative = 1e-14);

        let s = InterferometerSetting::new(0.3636).unwrap();
        assert_relative_eq!(
            postselection_probability(&s),
            0.032688713,
            max_relative = 1e-6
        );

        // Inverse direction from a measured power ratio.
        let s = InterferometerSetting::from_postselection_probability(55.0 / 70.0).unwrap();
        assert_relative_eq!(s.phi(), 2.17904, max_relative = 1e-5);
        assert_relative_eq!(s.postselection_probability(), 55.0 / 70.0, max_relative = 1e-12);
    }

    #[test]
    fn weak_value_examples() {
        let g_pi = InterferometerSetting::new(std::f64::consts::PI).unwrap();
        assert!(weak_value(&g_pi).unwrap().norm() < 1e-15);

        let s = InterferometerSetting::new(std::f64::consts::FRAC_PI_2).unwrap();
        let a = weak_value(&s).unwrap();
        assert_relative_eq!(a.im, 1.0, max_relative = 1e-12);

        let s = InterferometerSetting::new(0.02).unwrap();
        let a = weak_value(&s).unwrap();
        assert_relative_eq!(a.im, 99.9966667, max_relative = 1e-7);
        // small-angle: cot(phi/2) -> 2/phi
        assert_relative_eq!(a.im, 2.0 / 0.02, max_relative = 1e-4);
    }

    #[test]
    fn weak_value_rejects_phase_below_floor() {
        let s = InterferometerSetting::new(1e-12).unwrap();
        assert!(matches!(
            weak_value(&s),
            Err(WeakMeasurementError::SingularPhase(_))
        ));
    }

    #[test]
    fn kick_consistency() {
        let g = geometry();
        let kick = TiltKick::from_tilt(1.929e-9, &g).unwrap();
        let k_expected = 2.0 * std::f64::consts::PI * 1.929e-9 / g.wavelength();
        assert_relative_eq!(kick.momentum_kick(), k_expected, max_relative = 1e-12);

        let back = TiltKick::from_momentum_kick(kick.momentum_kick(), &g).unwrap();
        assert_relative_eq!(back.tilt(), kick.tilt(), max_relative = 1e-12);
    }

    #[test]
    fn dark_port_without_kick_is_fundamental_with_exact_probability() {
        let g = geometry();
        let s = InterferometerSetting::new(0.3636).unwrap();
        let dark = dark_port_field(&s, &TiltKick::zero(), &g, &default_grid(&g)).unwrap();
        assert_abs_diff_eq!(
            dark.postselection_probability,
            s.postselection_probability(),
            epsilon = 1e-10
        );
        let coeffs = decompose_field(&dark.field, 3, &g).unwrap();
        assert_relative_eq!(coeffs.coefficient(0).unwrap().norm(), 1.0, max_relative = 1e-9);
        assert!(coeffs.coefficient(1).unwrap().norm() < 1e-9);
    }

    #[test]
    fn dark_port_mode_ratio_matches_first_order_in_weak_regime() {
        let g = geometry();
        let s = InterferometerSetting::new(0.3636).unwrap();
        let kw = 1e-3;
        let kick = TiltKick::from_momentum_kick(kw / g.waist(), &g).unwrap();
        let dark = dark_port_field(&s, &kick, &g, &default_grid(&g)).unwrap();
        let coeffs = decompose_field(&dark.field, 2, &g).unwrap();
        let ratio = coeffs.ratio_to_fundamental(1).unwrap().norm();
        let first_order = (0.5 * s.phi()).tan().recip() * kw / 2.0;
        // cot(0.1818) * 5e-4 = 2.7199e-3
        assert_relative_eq!(first_order, 2.71990e-3, max_relative = 1e-4);
        assert_relative_eq!(ratio, first_order, max_relative = 1e-3);
    }

    #[test]
    fn strong_kick_breaks_the_weak_regime() {
        // kick comparable to the phase: the first-order picture fails. The
        // mode ratio itself is protected by cancelling Gaussian factors, but
        // the first-order post-selection probability is off by orders of
        // magnitude and the regime flag trips.
        let g = geometry();
        let s = InterferometerSetting::new(0.02).unwrap();
        let kick = TiltKick::from_momentum_kick(0.1 / g.waist(), &g).unwrap();

        let pointer = pointer_firstorder(&s, &kick, &g).unwrap();
        assert!(!pointer.weak_regime);
        assert!(pointer.weakness_ratio > 1.0);

        let dark = dark_port_field(&s, &kick, &g, &default_grid(&g)).unwrap();
        let weak_probability = s.postselection_probability();
        let deviation = (dark.postselection_probability - weak_probability) / weak_probability;
        assert!(
            deviation > 1.0,
            "kick should brighten the dark port far beyond sin^2(phi/2), got {deviation}"
        );
    }

    #[test]
    fn pointer_firstorder_examples() {
        let g = geometry();
        let s = InterferometerSetting::new(std::f64::consts::FRAC_PI_2).unwrap();

        let flat = pointer_firstorder(&s, &TiltKick::zero(), &g).unwrap();
        assert_relative_eq!(
            flat.coefficients.coefficient(0).unwrap().norm(),
            1.0,
            max_relative = 1e-14
        );
        assert!(flat.coefficients.coefficient(1).unwrap().norm() < 1e-15);
        assert!(flat.weak_regime);

        let kick = TiltKick::from_momentum_kick(0.01 / g.waist(), &g).unwrap();
        let pointer = pointer_firstorder(&s, &kick, &g).unwrap();
        let ratio = pointer.coefficients.ratio_to_fundamental(1).unwrap();
        assert_relative_eq!(ratio.norm(), 0.005, max_relative = 1e-9);
        // A_w = i cot(phi/2) makes the ratio real and positive.
        assert!(ratio.re > 0.0 && ratio.im.abs() < 1e-12 * ratio.norm());
    }

    #[test]
    fn amplified_shift_examples() {
        let g = geometry();
        let kick = TiltKick::from_momentum_kick(1.0, &g).unwrap();

        let s_pi = InterferometerSetting::new(std::f64::consts::PI).unwrap();
        let a = amplified_shift(&s_pi, &kick, &g).unwrap();
        assert!(a.amplification < 1e-15);

        let s = InterferometerSetting::new(0.02).unwrap();
        let a = amplified_shift(&s, &kick, &g).unwrap();
        assert_relative_eq!(a.amplification, 99.9966667, max_relative = 1e-7);
        assert_relative_eq!(
            a.shift,
            0.5 * a.amplification * g.waist() * g.waist(),
            max_relative = 1e-12
        );

        // Halving the phase doubles the amplification in the small-phase
        // regime to 0.1%.
        let s_half = InterferometerSetting::new(0.01).unwrap();
        let a_half = amplified_shift(&s_half, &kick, &g).unwrap();
        assert!((a_half.amplification / a.amplification / 2.0 - 1.0).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn weak_value_is_purely_imaginary(phi in 0.01f64..std::f64::consts::PI) {
            let s = InterferometerSetting::new(phi).unwrap();
            let a = weak_value(&s).unwrap();
            prop_assert!(a.re.abs() <= 1e-14 * a.norm().max(1e-30));
        }

        #[test]
        fn exact_ratio_matches_first_order_when_weak(
            phi in 0.05f64..(std::f64::consts::PI - 0.05),
            frac in 0.05f64..1.0,
        ) {
            // kick limited to k w0 <= 0.01 tan(phi/2), the weak window
            let g = BeamGeometry::new(1.064e-6, 60e-6).unwrap();
            let kw = 0.01 * (0.5 * phi).tan() * frac;
            let s = InterferometerSetting::new(phi).unwrap();
            let kick = TiltKick::from_momentum_kick(kw / g.waist(), &g).unwrap();
            let dark = dark_port_field(&s, &kick, &g, &default_grid(&g)).unwrap();
            let coeffs = decompose_field(&dark.field, 1, &g).unwrap();
            let ratio = coeffs.ratio_to_fundamental(1).unwrap().norm();
            let first_order = (0.5 * phi).tan().recip() * kw / 2.0;
            prop_assert!(
                (ratio - first_order).abs() <= 0.01 * first_order,
                "phi={}, kw={}: {} vs {}", phi, kw, ratio, first_order
            );
        }

        #[test]
        fn dark_port_ratio_increases_as_port_darkens(
            phi_hi in 0.4f64..2.0,
            step in 0.05f64..0.3,
        ) {
            // Destructive interference hits only the fundamental: darkening
            // the port (smaller phi) raises |c1/c0| monotonically.
            let g = BeamGeometry::new(1.064e-6, 60e-6).unwrap();
            let kick = TiltKick::from_momentum_kick(1e-3 / g.waist(), &g).unwrap();
            let grid_pts = default_grid(&g);
            let ratio_at = |phi: f64| {
                let s = InterferometerSetting::new(phi).unwrap();
                let dark = dark_port_field(&s, &kick, &g, &grid_pts).unwrap();
                decompose_field(&dark.field, 1, &g)
                    .unwrap()
                    .ratio_to_fundamental(1)
                    .unwrap()
                    .norm()
            };
            let low = ratio_at(phi_hi - step);
            let high = ratio_at(phi_hi);
            prop_assert!(low > high);
        }

        #[test]
        fn exact_probability_at_zero_kick(phi in 0.001f64..std::f64::consts::PI) {
            let g = BeamGeometry::new(1.064e-6, 60e-6).unwrap();
            let s = InterferometerSetting::new(phi).unwrap();
            let dark = dark_port_field(&s, &TiltKick::zero(), &g, &default_grid(&g)).unwrap();
            prop_assert!(
                (dark.postselection_probability - s.postselection_probability()).abs() <= 1e-10
            );
        }
    }
}
