//! Weak-value-amplified optical small-tilt measurement toolkit.
//!
//! Models a Sagnac interferometer whose internal tilting mirror imprints a
//! transverse momentum kick on a TEM00 beam. Near-destructive interference at
//! the dark port post-selects the light and amplifies the kick (weak-value
//! amplification); the tilt information appears as a TEM10 component of the
//! dark-port field and is read out either by balanced homodyne detection with
//! a TEM10 local oscillator or by a split detector.
//!
//! Module map:
//!
//! - [`hg_modes`] — one-dimensional Hermite-Gauss mode functions, overlap
//!   integrals, and numerical decomposition of sampled fields.
//! - [`weak_measurement`] — the pre-selection / weak-interaction /
//!   post-selection pipeline, both the exact dark-port field and its
//!   first-order weak-value form.
//! - [`detection`] — shot-noise-limited SNR and minimum-measurable-tilt
//!   formulas for balanced homodyne and split detection, plus the
//!   detector-saturation comparison.
//! - [`shot_noise_mc`] — seeded Monte Carlo shot-noise simulation used as a
//!   stochastic cross-check of the closed forms.
//! - [`lab_experiment`] — optical power to photon number conversion, lumped
//!   efficiency and piezo calibration fits, parameter sweeps, and operating
//!   point optimization.

pub mod detection;
pub mod hg_modes;
pub mod lab_experiment;
mod numerics;
pub mod shot_noise_mc;
pub mod weak_measurement;

pub use hg_modes::{BeamGeometry, ModeCoefficients, SampledField};
pub use weak_measurement::{InterferometerSetting, TiltKick};
