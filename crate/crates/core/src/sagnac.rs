//! Interferometer geometry, Sagnac phase and fiber loss.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Sidereal rotation rate of the Earth (rad/s).
pub const OMEGA_EARTH: f64 = 7.292115e-5;
/// Rounded value used for the apparatus calibration (rad/s).
pub const OMEGA_EARTH_CALIBRATION: f64 = 7.29e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalConstants {
    pub c: f64,
    pub omega_earth: f64,
    /// General-relativistic correction scale as a fraction of `omega_earth`.
    pub omega_gr_ratio: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            c: SPEED_OF_LIGHT,
            omega_earth: OMEGA_EARTH,
            omega_gr_ratio: 1e-9,
        }
    }
}

impl PhysicalConstants {
    pub fn with_omega_earth(omega_earth: f64) -> Self {
        Self {
            omega_earth,
            ..Self::default()
        }
    }

    pub fn omega_gr(&self) -> f64 {
        self.omega_earth * self.omega_gr_ratio
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.c > 0.0 && self.omega_earth > 0.0 && self.omega_gr_ratio > 0.0,
            || format!("physical constants must be positive: {self:?}"),
        )
    }

    /// `8 pi A / (lambda c)` using this speed of light.
    pub fn scale_factor(&self, geom: &InterferometerGeometry) -> f64 {
        8.0 * PI * geom.effective_area / (geom.wavelength * self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameShape {
    Square,
    Circular,
}

/// Which angle projects the Earth rate onto the loop normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `cos(frame_angle)`: rotatable frame, angle to the Earth axis.
    #[default]
    FrameAngle,
    /// `sin(latitude)`: frame fixed parallel to the ground.
    Latitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerGeometry {
    pub shape: FrameShape,
    /// Fiber length (m).
    pub fiber_length: f64,
    /// Frame perimeter (m).
    pub perimeter: f64,
    pub turns: u32,
    /// Effective enclosed area (m^2).
    pub effective_area: f64,
    /// Angle between the area vector and the Earth rotation axis (rad).
    #[serde(default)]
    pub frame_angle: f64,
    /// Site latitude (rad).
    #[serde(default)]
    pub latitude: f64,
    /// Optical wavelength (m).
    pub wavelength: f64,
    /// Residual area in the switch-off state as a fraction of the full area.
    #[serde(default)]
    pub off_area_imbalance: f64,
}

impl InterferometerGeometry {
    /// Square frame wound with `turns` turns: `A = (L/4)^2 / n_t`.
    pub fn square(fiber_length: f64, turns: u32, wavelength: f64) -> Result<Self> {
        ensure(turns >= 1, || "turns must be positive".into())?;
        let n = f64::from(turns);
        let geom = Self {
            shape: FrameShape::Square,
            fiber_length,
            perimeter: fiber_length / n,
            turns,
            effective_area: (fiber_length / 4.0).powi(2) / n,
            frame_angle: 0.0,
            latitude: 0.0,
            wavelength,
            off_area_imbalance: 0.0,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Circular coil of perimeter `P`: `A = n_t pi (P / 2 pi)^2`, `n_t = round(L/P)`.
    pub fn circular(fiber_length: f64, perimeter: f64, wavelength: f64) -> Result<Self> {
        ensure(perimeter > 0.0 && fiber_length > 0.0, || {
            "fiber length and perimeter must be positive".into()
        })?;
        let turns = (fiber_length / perimeter).round().max(1.0) as u32;
        let radius = perimeter / (2.0 * PI);
        let geom = Self {
            shape: FrameShape::Circular,
            fiber_length,
            perimeter,
            turns,
            effective_area: f64::from(turns) * PI * radius * radius,
            frame_angle: 0.0,
            latitude: 0.0,
            wavelength,
            off_area_imbalance: 0.0,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Geometry with a calibrated area instead of the constructed one.
    pub fn with_measured_area(
        shape: FrameShape,
        fiber_length: f64,
        perimeter: f64,
        effective_area: f64,
        wavelength: f64,
    ) -> Result<Self> {
        ensure(perimeter > 0.0, || "perimeter must be positive".into())?;
        let geom = Self {
            shape,
            fiber_length,
            perimeter,
            turns: (fiber_length / perimeter).round().max(1.0) as u32,
            effective_area,
            frame_angle: 0.0,
            latitude: 0.0,
            wavelength,
            off_area_imbalance: 0.0,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// The 2 km, 715 m^2 loop at 1546 nm.
    pub fn vienna_loop() -> Self {
        Self::with_measured_area(FrameShape::Square, 2000.0, 5.55, 715.0, 1546e-9)
            .expect("constant geometry is valid")
    }

    pub fn at_frame_angle(mut self, frame_angle: f64) -> Self {
        self.frame_angle = frame_angle;
        self
    }

    pub fn at_latitude(mut self, latitude: f64) -> Self {
        self.latitude = latitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fiber_length", self.fiber_length),
            ("perimeter", self.perimeter),
            ("effective_area", self.effective_area),
            ("wavelength", self.wavelength),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        ensure(self.turns >= 1, || "turns must be positive".into())?;
        let implied = self.fiber_length / self.perimeter;
        ensure((implied - f64::from(self.turns)).abs() <= 1.0, || {
            format!(
                "turns {} inconsistent with fiber_length/perimeter = {implied:.2}",
                self.turns
            )
        })?;
        ensure((0.0..=1.0).contains(&self.off_area_imbalance), || {
            "off_area_imbalance must lie in [0, 1]".into()
        })
    }

    pub fn projection_factor(&self, projection: Projection) -> f64 {
        match projection {
            Projection::FrameAngle => self.frame_angle.cos(),
            Projection::Latitude => self.latitude.sin(),
        }
    }

    pub fn effective_area_for(&self, switch: SwitchState) -> f64 {
        match switch {
            SwitchState::On => self.effective_area,
            SwitchState::Off => self.effective_area * self.off_area_imbalance,
        }
    }
}

/// Optical switch setting. `Off` reverses one of the two half-loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchState {
    On,
    Off,
}

impl SwitchState {
    pub const BOTH: [SwitchState; 2] = [SwitchState::On, SwitchState::Off];

    /// Detected count-rate multiplier relative to `On`.
    pub fn transmission(self) -> f64 {
        match self {
            SwitchState::On => 1.0,
            SwitchState::Off => 0.9,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SwitchState::On => "on",
            SwitchState::Off => "off",
        }
    }
}

impl std::str::FromStr for SwitchState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "on" => Ok(SwitchState::On),
            "off" => Ok(SwitchState::Off),
            other => Err(Error::Validation(format!("unknown switch state {other:?}"))),
        }
    }
}

/// `S = 8 pi A / (lambda c)` in seconds.
pub fn scale_factor(geom: &InterferometerGeometry) -> f64 {
    PhysicalConstants::default().scale_factor(geom)
}

/// Sagnac phase `8 pi omega A_eff cos(Theta) / (lambda c)` for one photon.
pub fn sagnac_phase(geom: &InterferometerGeometry, omega: f64, switch: SwitchState) -> f64 {
    8.0 * PI * omega * geom.effective_area_for(switch) * geom.frame_angle.cos()
        / (geom.wavelength * SPEED_OF_LIGHT)
}

/// Fiber transmission for an `n_photons`-photon state, `10^(-alpha L n / 10)`.
/// `alpha` in dB/km, `fiber_length` in meters.
pub fn transmission(alpha_db_per_km: f64, fiber_length: f64, n_photons: u32) -> f64 {
    10f64.powf(-alpha_db_per_km * (fiber_length / 1000.0) * f64::from(n_photons) / 10.0)
}

/// Probability that all `n` photons survive a channel of transmission `eta`.
pub fn noon_survival(eta: f64, n: u32) -> Result<f64> {
    ensure(eta > 0.0 && eta <= 1.0, || format!("transmission must be in (0, 1], got {eta}"))?;
    Ok(eta.powi(n as i32))
}

/// How a geometry is described in configuration files. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryInput {
    #[serde(flatten)]
    pub frame: FrameInput,
    #[serde(default)]
    pub frame_angle_deg: f64,
    #[serde(default)]
    pub latitude_deg: f64,
    #[serde(default)]
    pub off_area_imbalance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrameInput {
    Square { fiber_length: f64, turns: u32, wavelength: f64 },
    Circular { fiber_length: f64, perimeter: f64, wavelength: f64 },
    Measured { shape: FrameShape, fiber_length: f64, perimeter: f64, effective_area: f64, wavelength: f64 },
    /// The 2 km, 715 m^2 loop.
    Vienna,
}

impl GeometryInput {
    pub fn build(&self) -> Result<InterferometerGeometry> {
        let mut g = match self.frame {
            FrameInput::Square { fiber_length, turns, wavelength } => {
                InterferometerGeometry::square(fiber_length, turns, wavelength)?
            }
            FrameInput::Circular { fiber_length, perimeter, wavelength } => {
                InterferometerGeometry::circular(fiber_length, perimeter, wavelength)?
            }
            FrameInput::Measured { shape, fiber_length, perimeter, effective_area, wavelength } => {
                InterferometerGeometry::with_measured_area(shape, fiber_length, perimeter, effective_area, wavelength)?
            }
            FrameInput::Vienna => InterferometerGeometry::vienna_loop(),
        };
        g.frame_angle = self.frame_angle_deg.to_radians();
        g.latitude = self.latitude_deg.to_radians();
        g.off_area_imbalance = self.off_area_imbalance;
        g.validate()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn vienna_phase_and_scale_factor() {
        let g = InterferometerGeometry::vienna_loop();
        let phi = sagnac_phase(&g, OMEGA_EARTH_CALIBRATION, SwitchState::On);
        assert!((phi - 2.83e-3).abs() < 0.005e-3, "{phi}");
        assert!(rel(scale_factor(&g), 38.8) < 3e-3);
        assert_eq!(sagnac_phase(&g, OMEGA_EARTH, SwitchState::Off), 0.0);
        let tilted = g.at_frame_angle(PI / 2.0);
        assert!(sagnac_phase(&tilted, OMEGA_EARTH, SwitchState::On).abs() < 1e-15);
    }

    #[test]
    fn proposed_scale_factors() {
        let cfog = InterferometerGeometry::with_measured_area(FrameShape::Circular, 3000.0, 0.63, 150.0, 1550e-9).unwrap();
        assert!(rel(scale_factor(&cfog), 8.1) < 0.015);
        let gfring = InterferometerGeometry::square(47_500.0, 8, 1550e-9).unwrap();
        assert!(rel(gfring.effective_area, 17.6e6) < 2e-3);
        assert!(rel(scale_factor(&gfring), 951_320.0) < 0.01);
    }

    #[test]
    fn circular_area_from_perimeter() {
        let g = InterferometerGeometry::circular(3000.0, 0.63, 1550e-9).unwrap();
        assert_eq!(g.turns, 4762);
        assert!(rel(g.effective_area, 150.0) < 0.01);
    }

    #[test]
    fn phase_over_scale_factor_is_projected_rate() {
        let g = InterferometerGeometry::vienna_loop().at_frame_angle(0.4);
        let omega = 3.3e-5;
        let ratio = sagnac_phase(&g, omega, SwitchState::On) / scale_factor(&g);
        assert!(rel(ratio, omega * 0.4f64.cos()) < 1e-14);
    }

    #[test]
    fn phase_linear_in_rate_and_even_in_angle() {
        let g = InterferometerGeometry::vienna_loop();
        let a = sagnac_phase(&g.at_frame_angle(0.3), 1e-5, SwitchState::On);
        let b = sagnac_phase(&g.at_frame_angle(-0.3), 2e-5, SwitchState::On);
        assert!(rel(b, 2.0 * a) < 1e-14);
    }

    #[test]
    fn doubling_turns_halves_square_area() {
        let a = InterferometerGeometry::square(10_000.0, 4, 1550e-9).unwrap();
        let b = InterferometerGeometry::square(10_000.0, 8, 1550e-9).unwrap();
        assert!(rel(a.effective_area, 2.0 * b.effective_area) < 1e-15);
    }

    #[test]
    fn off_state_residual_area() {
        let mut g = InterferometerGeometry::vienna_loop();
        g.off_area_imbalance = 0.01;
        let on = sagnac_phase(&g, OMEGA_EARTH, SwitchState::On);
        let off = sagnac_phase(&g, OMEGA_EARTH, SwitchState::Off);
        assert!(rel(off, 0.01 * on) < 1e-14);
        assert_eq!(SwitchState::Off.transmission(), 0.9);
    }

    #[test]
    fn transmission_examples() {
        assert_eq!(transmission(0.0, 12_345.0, 3), 1.0);
        assert!((transmission(0.5, 2000.0, 1) - 0.794_328).abs() < 1e-6);
        assert!((transmission(0.16, 47_500.0, 2) - 10f64.powf(-1.52)).abs() < 1e-15);
        // Concatenated segments multiply.
        let whole = transmission(0.3, 5000.0, 2);
        let parts = transmission(0.3, 2000.0, 2) * transmission(0.3, 3000.0, 2);
        assert!(rel(whole, parts) < 1e-14);
    }

    #[test]
    fn noon_survival_examples() {
        assert!((noon_survival(0.1, 2).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(noon_survival(1.0, 7).unwrap(), 1.0);
        let heralded = noon_survival(0.5 * 0.1, 1).unwrap();
        assert!((1.0 - heralded - 0.95).abs() < 1e-12);
        assert!(noon_survival(0.0, 2).is_err());
        assert!(noon_survival(1.2, 2).is_err());
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(InterferometerGeometry::square(-1.0, 2, 1e-6).is_err());
        assert!(InterferometerGeometry::with_measured_area(FrameShape::Square, 2000.0, 5.55, 715.0, 0.0).is_err());
        let mut g = InterferometerGeometry::vienna_loop();
        g.turns = 10;
        assert!(g.validate().is_err());
    }

    #[test]
    fn geometry_input_from_json() {
        let g: GeometryInput = serde_json::from_str(
            r#"{"kind": "circular", "fiber_length": 3000, "perimeter": 0.63, "wavelength": 1.55e-6, "frame_angle_deg": 90}"#,
        )
        .unwrap();
        let geom = g.build().unwrap();
        assert_eq!(geom.shape, FrameShape::Circular);
        assert!((geom.frame_angle - PI / 2.0).abs() < 1e-15);
        let v: GeometryInput = serde_json::from_str(r#"{"kind": "vienna", "frame_angle_deg": 2.5}"#).unwrap();
        assert_eq!(v.build().unwrap().effective_area, 715.0);
        let bad: GeometryInput = serde_json::from_str(r#"{"kind": "square", "fiber_length": -1, "turns": 2, "wavelength": 1e-6}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
