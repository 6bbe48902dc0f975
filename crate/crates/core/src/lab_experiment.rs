//! Bridges the ideal detection formulas to desk-scale lab numbers.
//!
//! Optical power becomes a per-window photon number through
//! `N = P * lambda * T / (h c)` with the measurement window taken as the
//! inverse resolution bandwidth, `T = 1/RBW` (this convention reproduces the
//! reference photon number of the 1 mW / 10 kHz operating point to better
//! than 0.1%, which is why it was adopted). Everything the ideal formulas do
//! not capture — propagation loss, mode impurity, electronic noise floor,
//! detector quantum efficiency — is lumped into a single amplitude
//! efficiency `eta` applied as `theta_measured = theta_ideal / eta`.

use serde::{Deserialize, Serialize};
use std::io;
use thiserror::Error;

use crate::detection::{self, DetectionError};
use crate::hg_modes::{BeamGeometry, GeometryError};
use crate::weak_measurement::{InterferometerSetting, TiltKick, WeakMeasurementError};

/// Planck constant, J·s (exact, CODATA 2018: 6.62607015e-34).
pub const PLANCK_CONSTANT: f64 = 6.62607015e-34;
/// Speed of light in vacuum, m/s (exact: 299792458).
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Setting(#[from] WeakMeasurementError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error("need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate fit: all drive voltages are equal")]
    DegenerateFit,
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("sweep range must be non-empty and strictly monotone")]
    BadSweepRange,
    #[error("record CSV header must be exactly `p_in_uw,p_out_uw,v_mv,theta_min_nrad`")]
    BadCsvHeader,
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Photons per measurement window `T = 1/rbw`:
/// `N = power * wavelength / (rbw * h * c)`.
pub fn photons_from_power(power_w: f64, wavelength_m: f64, rbw_hz: f64) -> f64 {
    power_w * wavelength_m / (rbw_hz * PLANCK_CONSTANT * SPEED_OF_LIGHT)
}

/// One lab operating point: beam geometry, powers, spectrum-analyzer
/// settings, lumped efficiency, and the piezo drive calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabScenario {
    pub geometry: BeamGeometry,
    /// Power injected into the bright port, W.
    pub p_in: f64,
    /// Dark-port output power, W.
    pub p_out: f64,
    /// Local-oscillator power, W.
    pub p_lo: f64,
    /// Resolution bandwidth, Hz; its inverse is the measurement window.
    pub rbw: f64,
    /// Analysis frequency, Hz (carried for bookkeeping).
    pub analysis_frequency: f64,
    /// Lumped amplitude efficiency in (0, 1];
    /// `theta_measured = theta_ideal / efficiency`.
    pub efficiency: f64,
    /// Piezo calibration: tilt per volt, rad/V (zero intercept).
    pub piezo_slope: f64,
}

fn default_p_lo() -> f64 {
    1e-3
}

fn default_analysis_frequency() -> f64 {
    2e6
}

/// On-disk scenario schema (SI units).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    wavelength_m: f64,
    waist_m: f64,
    p_in_w: f64,
    p_out_w: f64,
    rbw_hz: f64,
    efficiency: f64,
    piezo_slope_rad_per_v: f64,
    #[serde(default = "default_p_lo")]
    p_lo_w: f64,
    #[serde(default = "default_analysis_frequency")]
    analysis_frequency_hz: f64,
}

impl LabScenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        geometry: BeamGeometry,
        p_in: f64,
        p_out: f64,
        p_lo: f64,
        rbw: f64,
        analysis_frequency: f64,
        efficiency: f64,
        piezo_slope: f64,
    ) -> Result<Self, LabError> {
        let scenario = Self {
            geometry,
            p_in,
            p_out,
            p_lo,
            rbw,
            analysis_frequency,
            efficiency,
            piezo_slope,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |msg: String| Err(LabError::InvalidScenario(msg));
        if !(self.p_in > 0.0 && self.p_in.is_finite()) {
            return bad(format!("p_in must be positive, got {}", self.p_in));
        }
        if !(self.p_out > 0.0 && self.p_out <= self.p_in) {
            return bad(format!(
                "p_out must lie in (0, p_in]; got p_out = {}, p_in = {}",
                self.p_out, self.p_in
            ));
        }
        if !(self.p_lo > 0.0 && self.p_lo.is_finite()) {
            return bad(format!("p_lo must be positive, got {}", self.p_lo));
        }
        if !(self.rbw > 0.0 && self.rbw.is_finite()) {
            return bad(format!("rbw must be positive, got {}", self.rbw));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad(format!(
                "efficiency must lie in (0, 1], got {}",
                self.efficiency
            ));
        }
        if !(self.piezo_slope.is_finite() && self.piezo_slope >= 0.0) {
            return bad(format!(
                "piezo_slope must be finite and non-negative, got {}",
                self.piezo_slope
            ));
        }
        if !(self.analysis_frequency > 0.0 && self.analysis_frequency.is_finite()) {
            return bad(format!(
                "analysis_frequency must be positive, got {}",
                self.analysis_frequency
            ));
        }
        Ok(())
    }

    /// `P_m = p_out / p_in`.
    pub fn postselection_probability(&self) -> f64 {
        self.p_out / self.p_in
    }

    pub fn setting(&self) -> Result<InterferometerSetting, LabError> {
        Ok(InterferometerSetting::from_postselection_probability(
            self.postselection_probability(),
        )?)
    }

    /// Injected photons per measurement window.
    pub fn injected_photons(&self) -> f64 {
        photons_from_power(self.p_in, self.geometry.wavelength(), self.rbw)
    }

    /// Dark-port photons per measurement window.
    pub fn signal_photons(&self) -> f64 {
        photons_from_power(self.p_out, self.geometry.wavelength(), self.rbw)
    }

    /// Local-oscillator photons per measurement window.
    pub fn lo_photons(&self) -> f64 {
        photons_from_power(self.p_lo, self.geometry.wavelength(), self.rbw)
    }

    /// Tilt produced by a piezo drive voltage.
    pub fn tilt_from_voltage(&self, volts: f64) -> f64 {
        self.piezo_slope * volts
    }

    pub fn from_json_str(json: &str) -> Result<Self, LabError> {
        let file: ScenarioFile = serde_json::from_str(json)?;
        Self::new(
            BeamGeometry::new(file.wavelength_m, file.waist_m)?,
            file.p_in_w,
            file.p_out_w,
            file.p_lo_w,
            file.rbw_hz,
            file.analysis_frequency_hz,
            file.efficiency,
            file.piezo_slope_rad_per_v,
        )
    }

    pub fn to_json_string(&self) -> Result<String, LabError> {
        let file = ScenarioFile {
            wavelength_m: self.geometry.wavelength(),
            waist_m: self.geometry.waist(),
            p_in_w: self.p_in,
            p_out_w: self.p_out,
            rbw_hz: self.rbw,
            efficiency: self.efficiency,
            piezo_slope_rad_per_v: self.piezo_slope,
            p_lo_w: self.p_lo,
            analysis_frequency_hz: self.analysis_frequency,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

/// One measured (or predicted) data point. SI units; the CSV interchange
/// format uses lab units (µW, mV, nrad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    /// Injected power, W.
    pub p_in: f64,
    /// Dark-port output power, W.
    pub p_out: f64,
    /// Piezo drive voltage, V.
    pub drive_voltage: f64,
    /// Minimum measurable tilt, rad.
    pub theta_min: f64,
    /// SNR at the drive voltage, when available.
    pub snr: Option<f64>,
}

/// The bundled desk-scale reference dataset: six operating points of
/// input/output power, piezo drive voltage, and measured minimum tilt at
/// `P_m ≈ 3.3%`, RBW 10 kHz (the `reproduce table1` fixture).
pub fn reference_scaling_records() -> Vec<MeasurementRecord> {
    let rows: [(f64, f64, f64, f64); 6] = [
        (210.0, 7.0, 1000.0, 8.29),
        (300.0, 10.0, 800.0, 6.93),
        (400.0, 13.0, 715.0, 6.01),
        (500.0, 17.0, 660.0, 5.37),
        (750.0, 25.0, 560.0, 4.39),
        (1000.0, 33.0, 400.0, 3.8),
    ];
    rows.iter()
        .map(|&(p_in_uw, p_out_uw, v_mv, theta_nrad)| MeasurementRecord {
            p_in: p_in_uw * 1e-6,
            p_out: p_out_uw * 1e-6,
            drive_voltage: v_mv * 1e-3,
            theta_min: theta_nrad * 1e-9,
            snr: None,
        })
        .collect()
}

/// Baseline scenario of the reference dataset: 1064 nm, 60 µm waist, 1 mW in
/// / 33 µW out, 1 mW local oscillator, RBW 10 kHz, ideal efficiency, and the
/// through-origin piezo calibration of the bundled dataset.
pub fn baseline_scenario() -> LabScenario {
    LabScenario::new(
        BeamGeometry::new(1.064e-6, 60e-6).expect("valid geometry"),
        1e-3,
        33e-6,
        1e-3,
        1e4,
        2e6,
        1.0,
        8.382e-9,
    )
    .expect("valid baseline")
}

/// Writes records as `p_in_uw,p_out_uw,v_mv,theta_min_nrad` CSV.
pub fn records_to_csv<W: io::Write>(
    records: &[MeasurementRecord],
    writer: W,
) -> Result<(), LabError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["p_in_uw", "p_out_uw", "v_mv", "theta_min_nrad"])?;
    for r in records {
        out.write_record([
            (r.p_in * 1e6).to_string(),
            (r.p_out * 1e6).to_string(),
            (r.drive_voltage * 1e3).to_string(),
            (r.theta_min * 1e9).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the record CSV written by [`records_to_csv`].
pub fn records_from_csv<R: io::Read>(reader: R) -> Result<Vec<MeasurementRecord>, LabError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = rdr.headers()?;
        let expected = ["p_in_uw", "p_out_uw", "v_mv", "theta_min_nrad"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(LabError::BadCsvHeader);
        }
    }
    let mut records = Vec::new();
    for row in rdr.deserialize() {
        let (p_in_uw, p_out_uw, v_mv, theta_nrad): (f64, f64, f64, f64) = row?;
        records.push(MeasurementRecord {
            p_in: p_in_uw * 1e-6,
            p_out: p_out_uw * 1e-6,
            drive_voltage: v_mv * 1e-3,
            theta_min: theta_nrad * 1e-9,
            snr: None,
        });
    }
    Ok(records)
}

/// Predicts the measurable minimum tilt (and, when a drive voltage is given,
/// the SNR at that drive) for a scenario.
///
/// The ideal minimum tilt comes from the homodyne formula with `N` from the
/// injected power and `phi` from the power ratio; the lumped efficiency
/// degrades it to `theta_ideal / eta`. The SNR at a drive voltage uses the
/// kick `k = 2 pi (slope * V) / lambda` and is degraded by `eta^2`.
pub fn predict_scenario(
    scenario: &LabScenario,
    drive_voltage: Option<f64>,
) -> Result<MeasurementRecord, LabError> {
    scenario.validate()?;
    let n = scenario.injected_photons();
    let setting = scenario.setting()?;
    let ideal = detection::mmt_bhd(n, &setting, &scenario.geometry)?;
    let theta_min = ideal / scenario.efficiency;
    let snr = match drive_voltage {
        Some(v) => {
            let tilt = scenario.tilt_from_voltage(v);
            let kick = TiltKick::from_tilt(tilt, &scenario.geometry)?;
            let ideal_snr = detection::snr_bhd(n, &setting, &kick, &scenario.geometry);
            Some(scenario.efficiency * scenario.efficiency * ideal_snr)
        }
        None => None,
    };
    Ok(MeasurementRecord {
        p_in: scenario.p_in,
        p_out: scenario.p_out,
        drive_voltage: drive_voltage.unwrap_or(0.0),
        theta_min,
        snr,
    })
}

/// Per-row relative deviation from the inverse-square-root power law
/// `theta(P) = theta_ref * sqrt(P_ref / P)`, referenced to the
/// highest-power row.
pub fn table1_scaling_check(records: &[MeasurementRecord]) -> Result<Vec<f64>, LabError> {
    if records.len() < 2 {
        return Err(LabError::InsufficientData {
            needed: 2,
            got: records.len(),
        });
    }
    let reference = records
        .iter()
        .max_by(|a, b| a.p_in.total_cmp(&b.p_in))
        .unwrap();
    Ok(records
        .iter()
        .map(|r| {
            let predicted = reference.theta_min * (reference.p_in / r.p_in).sqrt();
            r.theta_min / predicted - 1.0
        })
        .collect())
}

/// Least-squares line through the (drive voltage, minimum tilt) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiezoCalibration {
    /// rad per volt.
    pub slope: f64,
    /// rad; diagnostic only, the conversion itself is through-origin.
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `theta_min = slope * V + intercept` by ordinary least squares.
pub fn fit_piezo_calibration(records: &[MeasurementRecord]) -> Result<PiezoCalibration, LabError> {
    if records.len() < 2 {
        return Err(LabError::InsufficientData {
            needed: 2,
            got: records.len(),
        });
    }
    let n = records.len() as f64;
    let mean_v = records.iter().map(|r| r.drive_voltage).sum::<f64>() / n;
    let mean_t = records.iter().map(|r| r.theta_min).sum::<f64>() / n;
    let mut s_vv = 0.0;
    let mut s_vt = 0.0;
    let mut s_tt = 0.0;
    for r in records {
        let dv = r.drive_voltage - mean_v;
        let dt = r.theta_min - mean_t;
        s_vv += dv * dv;
        s_vt += dv * dt;
        s_tt += dt * dt;
    }
    if s_vv == 0.0 {
        return Err(LabError::DegenerateFit);
    }
    let slope = s_vt / s_vv;
    let intercept = mean_t - slope * mean_v;
    let r_squared = if s_tt == 0.0 {
        1.0
    } else {
        (s_vt * s_vt) / (s_vv * s_tt)
    };
    Ok(PiezoCalibration {
        slope,
        intercept,
        r_squared,
    })
}

/// Lumped amplitude efficiency: geometric mean over records of
/// `theta_ideal / theta_measured`, with the ideal value computed from each
/// record's own power and power ratio under the scenario's geometry and RBW.
pub fn fit_efficiency(
    records: &[MeasurementRecord],
    scenario: &LabScenario,
) -> Result<f64, LabError> {
    if records.is_empty() {
        return Err(LabError::InsufficientData { needed: 1, got: 0 });
    }
    let mut log_sum = 0.0;
    for r in records {
        let n = photons_from_power(r.p_in, scenario.geometry.wavelength(), scenario.rbw);
        let setting = InterferometerSetting::from_postselection_probability(r.p_out / r.p_in)?;
        let ideal = detection::mmt_bhd(n, &setting, &scenario.geometry)?;
        log_sum += (ideal / r.theta_min).ln();
    }
    Ok((log_sum / records.len() as f64).exp())
}

/// What a sweep varies; everything else is pinned by the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// `P_m` varies at fixed injected power (dark-to-bright tuning).
    Postselection,
    /// Injected photon number varies at fixed detected power
    /// (`N' = photons(p_out)` pinned, `P_m = N'/N` follows).
    InjectedPhotons,
    /// Mirror tilt varies; powers fixed.
    Tilt,
    /// Waist varies; powers and tilt fixed.
    Waist,
}

/// One sweep table row. SNRs and tilts include the scenario's lumped
/// efficiency (`eta^2` on SNR, `1/eta` on the minimum tilt).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub snr_bhd: f64,
    pub snr_sd: f64,
    /// rad.
    pub mmt_bhd: f64,
    /// rad.
    pub mmt_sd: f64,
}

/// Evaluates SNR and minimum measurable tilt for both schemes along `values`.
///
/// The SNR columns need a tilt to evaluate at: `reference_tilt` (rad), or by
/// default the scenario's own predicted measurable minimum tilt, which makes
/// the base operating point read SNR ≈ 1.
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    scenario: &LabScenario,
    reference_tilt: Option<f64>,
) -> Result<Vec<SweepRow>, LabError> {
    scenario.validate()?;
    if values.is_empty() {
        return Err(LabError::BadSweepRange);
    }
    if values.len() > 1 {
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        if !increasing && !decreasing {
            return Err(LabError::BadSweepRange);
        }
    }
    let base_tilt = match reference_tilt {
        Some(t) => t,
        None => predict_scenario(scenario, None)?.theta_min,
    };
    let eta = scenario.efficiency;
    let eta2 = eta * eta;
    let geometry = scenario.geometry;
    let n_base = scenario.injected_photons();

    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let (n, setting, kick, geom) = match axis {
            SweepAxis::Postselection => {
                let setting = InterferometerSetting::from_postselection_probability(v)?;
                let kick = TiltKick::from_tilt(base_tilt, &geometry)?;
                (n_base, setting, kick, geometry)
            }
            SweepAxis::InjectedPhotons => {
                let n_signal = scenario.signal_photons();
                if v < n_signal {
                    return Err(LabError::Infeasible(format!(
                        "injected photon number {v:e} below the pinned detected number {n_signal:e}"
                    )));
                }
                let setting =
                    InterferometerSetting::from_postselection_probability(n_signal / v)?;
                let kick = TiltKick::from_tilt(base_tilt, &geometry)?;
                (v, setting, kick, geometry)
            }
            SweepAxis::Tilt => {
                let setting = scenario.setting()?;
                let kick = TiltKick::from_tilt(v, &geometry)?;
                (n_base, setting, kick, geometry)
            }
            SweepAxis::Waist => {
                let geom = BeamGeometry::new(geometry.wavelength(), v)?;
                let setting = scenario.setting()?;
                let kick = TiltKick::from_tilt(base_tilt, &geom)?;
                (n_base, setting, kick, geom)
            }
        };
        rows.push(SweepRow {
            axis_value: v,
            snr_bhd: eta2 * detection::snr_bhd(n, &setting, &kick, &geom),
            snr_sd: eta2 * detection::snr_sd(n, &setting, &kick, &geom),
            mmt_bhd: detection::mmt_bhd(n, &setting, &geom)? / eta,
            mmt_sd: detection::mmt_sd(n, &setting, &geom)? / eta,
        });
    }
    Ok(rows)
}

/// Writes a sweep table as `axis,snr_bhd,snr_sd,mmt_bhd_rad,mmt_sd_rad` CSV.
pub fn sweep_to_csv<W: io::Write>(rows: &[SweepRow], writer: W) -> Result<(), LabError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["axis", "snr_bhd", "snr_sd", "mmt_bhd_rad", "mmt_sd_rad"])?;
    for r in rows {
        out.write_record([
            r.axis_value.to_string(),
            r.snr_bhd.to_string(),
            r.snr_sd.to_string(),
            r.mmt_bhd.to_string(),
            r.mmt_sd.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Caps and floors for operating-point optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationConstraints {
    pub geometry: BeamGeometry,
    pub rbw: f64,
    /// Hard cap on injected power, W. Must be finite.
    pub max_p_in: f64,
    /// Detector saturation: maximum detected (dark-port) power, W.
    pub saturation_p_out: f64,
    /// Detection floor: smallest workable dark-port power, W.
    pub min_p_out: f64,
    /// Lumped efficiency applied to the prediction.
    pub efficiency: f64,
}

/// Which constraints pin the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingConstraint {
    InputPowerCap,
    OutputFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedOperatingPoint {
    pub p_in: f64,
    pub p_out: f64,
    pub postselection_probability: f64,
    /// Predicted measurable minimum tilt, rad.
    pub theta_min: f64,
    pub binding: Vec<BindingConstraint>,
}

/// Minimizes the predicted minimum measurable tilt subject to the power cap,
/// the saturation cap on detected power, and the detection floor.
///
/// The minimum tilt falls with injected photons and with darker
/// post-selection, so the optimum sits at the injected-power cap with the
/// output at the detection floor; saturation only matters for feasibility.
pub fn optimize_mmt(
    constraints: &OptimizationConstraints,
) -> Result<OptimizedOperatingPoint, LabError> {
    if !constraints.max_p_in.is_finite() || constraints.max_p_in <= 0.0 {
        return Err(LabError::Infeasible(format!(
            "max_p_in must be finite and positive, got {}",
            constraints.max_p_in
        )));
    }
    if !(constraints.min_p_out > 0.0) {
        return Err(LabError::Infeasible(format!(
            "min_p_out must be positive, got {}",
            constraints.min_p_out
        )));
    }
    if constraints.min_p_out > constraints.saturation_p_out {
        return Err(LabError::Infeasible(format!(
            "detection floor {} W exceeds the saturation cap {} W",
            constraints.min_p_out, constraints.saturation_p_out
        )));
    }
    if constraints.min_p_out > constraints.max_p_in {
        return Err(LabError::Infeasible(format!(
            "detection floor {} W exceeds the injected power cap {} W",
            constraints.min_p_out, constraints.max_p_in
        )));
    }
    let p_in = constraints.max_p_in;
    let p_out = constraints.min_p_out;
    let n = photons_from_power(p_in, constraints.geometry.wavelength(), constraints.rbw);
    let setting = InterferometerSetting::from_postselection_probability(p_out / p_in)?;
    let ideal = detection::mmt_bhd(n, &setting, &constraints.geometry)?;
    Ok(OptimizedOperatingPoint {
        p_in,
        p_out,
        postselection_probability: p_out / p_in,
        theta_min: ideal / constraints.efficiency,
        binding: vec![
            BindingConstraint::InputPowerCap,
            BindingConstraint::OutputFloor,
        ],
    })
}
