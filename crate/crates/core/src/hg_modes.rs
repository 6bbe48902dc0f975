//! One-dimensional Hermite-Gauss mode functions and mode decomposition.
//!
//! The mode basis is
//!
//! ```text
//! psi_n(x) = (2 / (pi w0^2))^(1/4) / sqrt(2^n n!) * H_n(sqrt(2) x / w0) * exp(-x^2 / w0^2)
//! ```
//!
//! normalized so that `∫ psi_n(x)^2 dx = 1` (the prefactor therefore carries
//! `w0^2`, not `w0`, to keep the functions dimensionally consistent as
//! `m^(-1/2)`). `H_n` is the physicists' Hermite polynomial and `w0` the TEM00
//! amplitude waist.
//!
//! A mirror tilt shows up on a TEM00 beam as a transverse momentum kick
//! `e^{ikx}`; its exact overlap with the first-order mode,
//! `⟨psi_1|e^{ikx}|psi_0⟩ = i (k w0 / 2) exp(-k^2 w0^2 / 8)`, is provided as
//! an oracle for the first-order expansion used elsewhere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io;
use thiserror::Error;

use crate::numerics;

/// Default number of samples for synthesized decomposition grids.
pub const DEFAULT_GRID_POINTS: usize = 2001;
/// Default half-span of synthesized grids, in units of the waist.
pub const DEFAULT_GRID_HALF_SPAN_WAISTS: f64 = 6.0;
/// Minimum half-span (in waists) a grid must cover for a trustworthy
/// decomposition.
pub const MIN_GRID_HALF_SPAN_WAISTS: f64 = 5.0;

/// Relative tolerance of the uniform-spacing check on grids.
const GRID_SPACING_RTOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("wavelength must be positive and finite, got {0}")]
    InvalidWavelength(f64),
    #[error("waist must be positive and finite, got {0}")]
    InvalidWaist(f64),
}

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("field needs at least two samples")]
    TooFewSamples,
    #[error("grid and samples lengths differ: {grid} vs {samples}")]
    LengthMismatch { grid: usize, samples: usize },
    #[error("grid positions must be strictly increasing")]
    NonIncreasingGrid,
    #[error("grid spacing is not uniform within {GRID_SPACING_RTOL:e} relative tolerance")]
    NonUniformGrid,
    #[error(
        "grid spans [{lo:e}, {hi:e}] m but must reach at least ±{required:e} m \
         (±{MIN_GRID_HALF_SPAN_WAISTS} waists)"
    )]
    GridTooNarrow { lo: f64, hi: f64, required: f64 },
    #[error("CSV header must be exactly `x_m,re,im`")]
    BadCsvHeader,
    #[error("CSV parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Wavelength and TEM00 amplitude waist; fixes all of the mode math.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    wavelength: f64,
    waist: f64,
}

impl BeamGeometry {
    pub fn new(wavelength: f64, waist: f64) -> Result<Self, GeometryError> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(GeometryError::InvalidWavelength(wavelength));
        }
        if !(waist > 0.0 && waist.is_finite()) {
            return Err(GeometryError::InvalidWaist(waist));
        }
        Ok(Self { wavelength, waist })
    }

    /// Wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// TEM00 amplitude waist in meters.
    pub fn waist(&self) -> f64 {
        self.waist
    }

    /// Diagnostic flag: the paraxial mode picture becomes questionable once
    /// the waist is not large compared to the wavelength. Never enforced.
    pub fn paraxial_suspect(&self) -> bool {
        self.waist < 10.0 * self.wavelength
    }
}

/// Physicists' Hermite polynomial `H_n(u)` by upward recurrence
/// `H_{n+1} = 2u H_n - 2n H_{n-1}`.
///
/// The recurrence is numerically stable over the small orders used here;
/// values stay finite for `n <= 30`, `|u| <= 20`.
pub fn hermite_poly(n: u32, u: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0 * u,
        _ => {
            let mut h_prev = 1.0;
            let mut h = 2.0 * u;
            for m in 1..n {
                let next = 2.0 * u * h - 2.0 * m as f64 * h_prev;
                h_prev = h;
                h = next;
            }
            h
        }
    }
}

/// Mode function `psi_n(x)` in `m^(-1/2)`, normalized to unit square integral.
pub fn mode_amplitude(n: u32, x: f64, geometry: &BeamGeometry) -> f64 {
    let w = geometry.waist();
    let prefactor = (2.0 / (std::f64::consts::PI * w * w)).powf(0.25);
    // 1 / sqrt(2^n n!) accumulated as a product to avoid overflow.
    let mut norm = 1.0;
    for m in 1..=n {
        norm /= (2.0 * m as f64).sqrt();
    }
    let u = std::f64::consts::SQRT_2 * x / w;
    prefactor * norm * hermite_poly(n, u) * (-x * x / (w * w)).exp()
}

/// Exact tilt-coupling coefficient `⟨psi_1|e^{ikx}|psi_0⟩` for a bare
/// momentum kick `k`:
///
/// ```text
/// i * (k w0 / 2) * exp(-k^2 w0^2 / 8)
/// ```
///
/// Serves as the all-orders oracle for the first-order coefficient
/// `i k w0 / 2`, whose relative error grows as `k^2 w0^2 / 8`.
pub fn tilt_coupling_exact(k: f64, geometry: &BeamGeometry) -> Complex64 {
    let kw = k * geometry.waist();
    Complex64::new(0.0, 0.5 * kw * (-kw * kw / 8.0).exp())
}

/// A complex field sampled on a uniform transverse grid.
///
/// Samples are amplitudes in `m^(-1/2)`: for a normalized field the discrete
/// integral of `|sample|^2` approximates one.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: Vec<f64>,
    samples: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: Vec<f64>, samples: Vec<Complex64>) -> Result<Self, FieldError> {
        if grid.len() < 2 {
            return Err(FieldError::TooFewSamples);
        }
        if grid.len() != samples.len() {
            return Err(FieldError::LengthMismatch {
                grid: grid.len(),
                samples: samples.len(),
            });
        }
        let dx = grid[1] - grid[0];
        if !(dx > 0.0) {
            return Err(FieldError::NonIncreasingGrid);
        }
        for pair in grid.windows(2) {
            let step = pair[1] - pair[0];
            if !(step > 0.0) {
                return Err(FieldError::NonIncreasingGrid);
            }
            if (step - dx).abs() > GRID_SPACING_RTOL * dx.abs() {
                return Err(FieldError::NonUniformGrid);
            }
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(
        grid: &[f64],
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, FieldError> {
        let samples = grid.iter().map(|&x| f(x)).collect();
        Self::new(grid.to_vec(), samples)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Discrete `∫ |E|^2 dx` by composite Simpson.
    pub fn norm_squared(&self) -> f64 {
        let intensity: Vec<f64> = self.samples.iter().map(|s| s.norm_sqr()).collect();
        numerics::simpson(self.spacing(), &intensity)
    }

    /// Rescales to unit norm; returns the prior `∫ |E|^2 dx`.
    pub fn normalize(&mut self) -> f64 {
        let n2 = self.norm_squared();
        if n2 > 0.0 {
            let inv = 1.0 / n2.sqrt();
            for s in &mut self.samples {
                *s *= inv;
            }
        }
        n2
    }

    /// Errors unless the grid reaches at least `half_span_waists` waists on
    /// both sides of the axis.
    pub fn require_span(
        &self,
        geometry: &BeamGeometry,
        half_span_waists: f64,
    ) -> Result<(), FieldError> {
        let required = half_span_waists * geometry.waist();
        let lo = self.grid[0];
        let hi = *self.grid.last().unwrap();
        if lo > -required || hi < required {
            return Err(FieldError::GridTooNarrow { lo, hi, required });
        }
        Ok(())
    }

    /// Writes `x_m,re,im` CSV with a header row.
    pub fn to_csv<W: io::Write>(&self, writer: W) -> Result<(), FieldError> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["x_m", "re", "im"])?;
        for (x, s) in self.grid.iter().zip(&self.samples) {
            out.write_record([x.to_string(), s.re.to_string(), s.im.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the `x_m,re,im` CSV format produced by [`Self::to_csv`].
    pub fn from_csv<R: io::Read>(reader: R) -> Result<Self, FieldError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        {
            let headers = rdr.headers()?;
            if headers.len() != 3
                || &headers[0] != "x_m"
                || &headers[1] != "re"
                || &headers[2] != "im"
            {
                return Err(FieldError::BadCsvHeader);
            }
        }
        let mut grid = Vec::new();
        let mut samples = Vec::new();
        for record in rdr.deserialize() {
            let (x, re, im): (f64, f64, f64) = record?;
            grid.push(x);
            samples.push(Complex64::new(re, im));
        }
        Self::new(grid, samples)
    }
}

/// Complex amplitudes on the Hermite-Gauss basis, orders `0..=max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    coeffs: Vec<Complex64>,
}

impl ModeCoefficients {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "need at least the fundamental coefficient");
        Self { coeffs }
    }

    pub fn max_order(&self) -> u32 {
        (self.coeffs.len() - 1) as u32
    }

    pub fn coefficient(&self, n: u32) -> Option<Complex64> {
        self.coeffs.get(n as usize).copied()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `Σ |c_n|^2` over the retained orders.
    pub fn norm_squared(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Truncation residual `1 - Σ |c_n|^2`; meaningful for decompositions of
    /// normalized fields, where it is the power left in discarded orders.
    pub fn residual(&self) -> f64 {
        1.0 - self.norm_squared()
    }

    /// `c_n / c_0`.
    pub fn ratio_to_fundamental(&self, n: u32) -> Option<Complex64> {
        Some(self.coefficient(n)? / self.coeffs[0])
    }

    pub fn normalize(&mut self) {
        let n = self.norm_squared().sqrt();
        if n > 0.0 {
            for c in &mut self.coeffs {
                *c /= n;
            }
        }
    }
}

/// Synthesized symmetric grid covering ±[`DEFAULT_GRID_HALF_SPAN_WAISTS`]
/// waists with [`DEFAULT_GRID_POINTS`] samples.
pub fn default_grid(geometry: &BeamGeometry) -> Vec<f64> {
    grid(geometry, DEFAULT_GRID_HALF_SPAN_WAISTS, DEFAULT_GRID_POINTS)
}

/// Symmetric grid of `points` samples spanning `±half_span_waists` waists.
pub fn grid(geometry: &BeamGeometry, half_span_waists: f64, points: usize) -> Vec<f64> {
    numerics::symmetric_grid(half_span_waists * geometry.waist(), points)
}

/// Projects a sampled field onto modes `0..=max_order` by discrete inner
/// products `c_n = ∫ psi_n(x) E(x) dx` (composite Simpson on the field grid).
///
/// The grid must span at least ±[`MIN_GRID_HALF_SPAN_WAISTS`] waists; the
/// truncation residual is available as [`ModeCoefficients::residual`].
pub fn decompose_field(
    field: &SampledField,
    max_order: u32,
    geometry: &BeamGeometry,
) -> Result<ModeCoefficients, FieldError> {
    field.require_span(geometry, MIN_GRID_HALF_SPAN_WAISTS)?;
    let dx = field.spacing();
    let coeffs = (0..=max_order)
        .map(|n| {
            let products: Vec<Complex64> = field
                .grid()
                .iter()
                .zip(field.samples())
                .map(|(&x, &s)| s * mode_amplitude(n, x, geometry))
                .collect();
            numerics::simpson(dx, &products)
        })
        .collect();
    Ok(ModeCoefficients::new(coeffs))
}

/// Decomposes an analytic field, doubling the grid resolution until every
/// coefficient is stable to `1e-10` (starting from the default grid, capped
/// at 8x resolution).
pub fn decompose_adaptive(
    f: impl Fn(f64) -> Complex64,
    max_order: u32,
    geometry: &BeamGeometry,
) -> ModeCoefficients {
    let mut points = DEFAULT_GRID_POINTS;
    let make = |points: usize| {
        let g = grid(geometry, DEFAULT_GRID_HALF_SPAN_WAISTS, points);
        let field = SampledField::from_fn(&g, &f).expect("synthesized grid is valid");
        decompose_field(&field, max_order, geometry).expect("synthesized grid spans enough")
    };
    let mut current = make(points);
    for _ in 0..3 {
        points = 2 * points - 1;
        let refined = make(points);
        let drift = current
            .coefficients()
            .iter()
            .zip(refined.coefficients())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        current = refined;
        if drift < 1e-10 {
            break;
        }
    }
    current
}
