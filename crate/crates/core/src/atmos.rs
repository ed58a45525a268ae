//! Standard-atmosphere model and multirotor powertrain sizing.
//!
//! Thrust and shaft power follow the usual propeller scaling laws
//! `T = Ct·ρ·n²·D⁴` and `P = Cp·ρ·n³·D⁵` with `n` in revolutions per second.
//! The sizing chain solves the hover equilibrium of a six-rotor vehicle and
//! turns the electrical hover power into a flight-time estimate.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sea-level standard density, kg/m³.
pub const SEA_LEVEL_DENSITY: f64 = 1.225;
/// Sea-level standard pressure, Pa.
pub const SEA_LEVEL_PRESSURE: f64 = 101_325.0;
/// Sea-level standard temperature, K.
pub const SEA_LEVEL_TEMPERATURE: f64 = 288.15;
/// Tropospheric temperature lapse rate, K/m.
pub const LAPSE_RATE: f64 = 0.0065;
/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;
/// Specific gas constant of dry air, J/(kg·K).
pub const GAS_CONSTANT: f64 = 287.053;
/// Upper bound of the troposphere model, m.
pub const TROPOPAUSE_M: f64 = 11_000.0;

/// Number of rotors on the airframe.
pub const MOTOR_COUNT: u32 = 6;
/// Relative accuracy attached to every sizing estimate.
pub const SIZING_TOLERANCE: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtmosError {
    #[error("altitude {0} m is outside the troposphere model range [0, 11000] m")]
    AltitudeOutOfRange(f64),
    #[error("pressure {0} Pa maps outside the troposphere model range")]
    PressureOutOfRange(f64),
    #[error("invalid powertrain parameter `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("invalid environment parameter `{field}`: {reason}")]
    InvalidEnvironment { field: &'static str, reason: String },
    #[error("infeasible configuration: thrust-to-weight {thrust_to_weight:.3} at maximum rpm")]
    Infeasible { thrust_to_weight: f64 },
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AtmosError>;

fn isa_exponent() -> f64 {
    GRAVITY / (GAS_CONSTANT * LAPSE_RATE)
}

fn check_altitude(altitude_m: f64) -> Result<()> {
    if !(0.0..=TROPOPAUSE_M).contains(&altitude_m) {
        return Err(AtmosError::AltitudeOutOfRange(altitude_m));
    }
    Ok(())
}

/// ISA troposphere density. `temperature_offset_k` shifts the base temperature.
pub fn air_density(altitude_m: f64, temperature_offset_k: f64) -> Result<f64> {
    check_altitude(altitude_m)?;
    let base_temp = SEA_LEVEL_TEMPERATURE + temperature_offset_k;
    let ratio = 1.0 - LAPSE_RATE * altitude_m / base_temp;
    Ok(SEA_LEVEL_DENSITY * ratio.powf(isa_exponent() - 1.0))
}

/// ISA troposphere static pressure (standard day).
pub fn air_pressure(altitude_m: f64) -> Result<f64> {
    check_altitude(altitude_m)?;
    let ratio = 1.0 - LAPSE_RATE * altitude_m / SEA_LEVEL_TEMPERATURE;
    Ok(SEA_LEVEL_PRESSURE * ratio.powf(isa_exponent()))
}

/// Inverse of [`air_pressure`]. Accepts pressures slightly outside the
/// nominal range so that noisy barometer readings still map to an altitude.
pub fn pressure_altitude(pressure_pa: f64) -> Result<f64> {
    if !(pressure_pa.is_finite() && pressure_pa > 0.0) {
        return Err(AtmosError::PressureOutOfRange(pressure_pa));
    }
    let ratio = (pressure_pa / SEA_LEVEL_PRESSURE).powf(1.0 / isa_exponent());
    Ok(SEA_LEVEL_TEMPERATURE / LAPSE_RATE * (1.0 - ratio))
}

/// Flight environment at the operating site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub altitude_m: f64,
    #[serde(default, rename = "temperature_offset_K")]
    pub temperature_offset_k: f64,
    #[serde(default)]
    pub wind_mean_mps: f64,
    #[serde(default)]
    pub wind_max_mps: f64,
}

impl Environment {
    pub fn new(altitude_m: f64, temperature_offset_k: f64) -> Self {
        Self {
            altitude_m,
            temperature_offset_k,
            wind_mean_mps: 0.0,
            wind_max_mps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_altitude(self.altitude_m)?;
        if !(self.wind_mean_mps >= 0.0) {
            return Err(AtmosError::InvalidEnvironment {
                field: "wind_mean_mps",
                reason: "must be >= 0".into(),
            });
        }
        if self.wind_max_mps < self.wind_mean_mps {
            return Err(AtmosError::InvalidEnvironment {
                field: "wind_max_mps",
                reason: "must be >= wind_mean_mps".into(),
            });
        }
        Ok(())
    }

    pub fn air_density(&self) -> Result<f64> {
        air_density(self.altitude_m, self.temperature_offset_k)
    }
}

fn default_drivetrain_efficiency() -> f64 {
    0.7
}

fn default_usable_fraction() -> f64 {
    0.8
}

fn default_motor_count() -> u32 {
    MOTOR_COUNT
}

fn default_cell_voltage() -> f64 {
    3.7
}

/// Propeller, motor and battery description of the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowertrainSpec {
    pub prop_diameter_m: f64,
    pub prop_pitch_m: f64,
    #[serde(rename = "thrust_coeff_Ct")]
    pub thrust_coeff: f64,
    #[serde(rename = "power_coeff_Cp")]
    pub power_coeff: f64,
    #[serde(default = "default_motor_count")]
    pub motor_count: u32,
    pub battery_cells: u32,
    #[serde(default = "default_cell_voltage", rename = "cell_voltage_nominal_V")]
    pub cell_voltage_nominal_v: f64,
    #[serde(rename = "capacity_mAh")]
    pub capacity_mah: f64,
    #[serde(rename = "discharge_C")]
    pub discharge_c: f64,
    #[serde(default = "default_drivetrain_efficiency")]
    pub drivetrain_efficiency: f64,
    #[serde(default = "default_usable_fraction")]
    pub usable_capacity_fraction: f64,
    pub total_mass_kg: f64,
    /// Motor speed at full throttle under load.
    pub max_rpm: f64,
}

impl PowertrainSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |field: &'static str, reason: &str| AtmosError::InvalidSpec {
            field,
            reason: reason.to_string(),
        };
        if self.motor_count != MOTOR_COUNT {
            return Err(invalid(
                "motor_count",
                "hexacopter requires exactly 6 motors",
            ));
        }
        if !matches!(self.battery_cells, 3 | 4) {
            return Err(invalid("battery_cells", "must be 3 or 4"));
        }
        let positive = [
            ("prop_diameter_m", self.prop_diameter_m),
            ("prop_pitch_m", self.prop_pitch_m),
            ("thrust_coeff_Ct", self.thrust_coeff),
            ("power_coeff_Cp", self.power_coeff),
            ("cell_voltage_nominal_V", self.cell_voltage_nominal_v),
            ("capacity_mAh", self.capacity_mah),
            ("discharge_C", self.discharge_c),
            ("total_mass_kg", self.total_mass_kg),
            ("max_rpm", self.max_rpm),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(field, "must be finite and > 0"));
            }
        }
        for (field, value) in [
            ("drivetrain_efficiency", self.drivetrain_efficiency),
            ("usable_capacity_fraction", self.usable_capacity_fraction),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(invalid(field, "must be in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Nominal pack voltage, cells × nominal cell voltage.
    pub fn pack_voltage(&self) -> f64 {
        f64::from(self.battery_cells) * self.cell_voltage_nominal_v
    }

    pub fn weight_n(&self) -> f64 {
        self.total_mass_kg * GRAVITY
    }

    /// Per-propeller thrust per (rev/s)² at the given density.
    pub fn thrust_per_rev2(&self, density: f64) -> f64 {
        self.thrust_coeff * density * self.prop_diameter_m.powi(4)
    }

    /// Per-propeller shaft power per (rev/s)³ at the given density.
    pub fn power_per_rev3(&self, density: f64) -> f64 {
        self.power_coeff * density * self.prop_diameter_m.powi(5)
    }
}

/// Thrust of a single propeller in newtons.
pub fn static_thrust(spec: &PowertrainSpec, rpm: f64, density: f64) -> f64 {
    debug_assert!(rpm >= 0.0 && density > 0.0);
    let n = rpm / 60.0;
    spec.thrust_per_rev2(density) * n * n
}

/// Mechanical shaft power of a single propeller in watts.
pub fn prop_power(spec: &PowertrainSpec, rpm: f64, density: f64) -> f64 {
    debug_assert!(rpm >= 0.0 && density > 0.0);
    let n = rpm / 60.0;
    spec.power_per_rev3(density) * n * n * n
}

/// Hover equilibrium of the whole vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoverPoint {
    pub rpm: f64,
    pub current_a: f64,
    pub throttle_fraction: f64,
    pub electrical_power_w: f64,
}

pub fn thrust_to_weight(spec: &PowertrainSpec, density: f64) -> f64 {
    f64::from(spec.motor_count) * static_thrust(spec, spec.max_rpm, density) / spec.weight_n()
}

pub fn hover_point(spec: &PowertrainSpec, env: &Environment) -> Result<HoverPoint> {
    spec.validate()?;
    env.validate()?;
    let density = env.air_density()?;
    let tw = thrust_to_weight(spec, density);
    if tw <= 1.0 {
        return Err(AtmosError::Infeasible {
            thrust_to_weight: tw,
        });
    }
    let motors = f64::from(spec.motor_count);
    let n = (spec.weight_n() / (motors * spec.thrust_per_rev2(density))).sqrt();
    let rpm = n * 60.0;
    let mechanical = motors * prop_power(spec, rpm, density);
    let electrical = mechanical / spec.drivetrain_efficiency;
    Ok(HoverPoint {
        rpm,
        current_a: electrical / spec.pack_voltage(),
        throttle_fraction: rpm / spec.max_rpm,
        electrical_power_w: electrical,
    })
}

/// Hover endurance in minutes.
pub fn estimate_flight_time(spec: &PowertrainSpec, env: &Environment) -> Result<f64> {
    let hover = hover_point(spec, env)?;
    let usable_ah = spec.capacity_mah / 1000.0 * spec.usable_capacity_fraction;
    Ok(usable_ah / hover.current_a * 60.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizingReport {
    pub air_density_kgm3: f64,
    pub pack_voltage_v: f64,
    pub hover_rpm: f64,
    pub hover_throttle_fraction: f64,
    pub hover_current_a: f64,
    pub hover_power_w: f64,
    pub flight_time_min: f64,
    pub thrust_to_weight: f64,
    pub tolerance_fraction: f64,
}

impl SizingReport {
    /// Lower and upper flight-time bounds implied by the attached tolerance.
    pub fn flight_time_band(&self) -> (f64, f64) {
        (
            self.flight_time_min * (1.0 - self.tolerance_fraction),
            self.flight_time_min * (1.0 + self.tolerance_fraction),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for SizingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = self.tolerance_fraction * 100.0;
        let (lo, hi) = self.flight_time_band();
        writeln!(f, "Hexacopter sizing report (estimates ±{pct:.0}%)")?;
        writeln!(
            f,
            "  air density        {:>10.4} kg/m^3",
            self.air_density_kgm3
        )?;
        writeln!(f, "  pack voltage       {:>10.2} V", self.pack_voltage_v)?;
        writeln!(f, "  hover speed        {:>10.0} rpm", self.hover_rpm)?;
        writeln!(
            f,
            "  hover throttle     {:>10.3}",
            self.hover_throttle_fraction
        )?;
        writeln!(f, "  hover power        {:>10.1} W", self.hover_power_w)?;
        writeln!(f, "  hover current      {:>10.2} A", self.hover_current_a)?;
        writeln!(f, "  thrust/weight      {:>10.2}", self.thrust_to_weight)?;
        write!(
            f,
            "  flight time        {:>10.2} min  [{lo:.2}, {hi:.2}]",
            self.flight_time_min
        )
    }
}

pub fn build_sizing_report(spec: &PowertrainSpec, env: &Environment) -> Result<SizingReport> {
    let hover = hover_point(spec, env)?;
    let density = env.air_density()?;
    let flight_time_min = estimate_flight_time(spec, env)?;
    Ok(SizingReport {
        air_density_kgm3: density,
        pack_voltage_v: spec.pack_voltage(),
        hover_rpm: hover.rpm,
        hover_throttle_fraction: hover.throttle_fraction,
        hover_current_a: hover.current_a,
        hover_power_w: hover.electrical_power_w,
        flight_time_min,
        thrust_to_weight: thrust_to_weight(spec, density),
        tolerance_fraction: SIZING_TOLERANCE,
    })
}

/// Sizing input file: an `[environment]` and a `[powertrain]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingConfig {
    pub environment: Environment,
    pub powertrain: PowertrainSpec,
}

impl SizingConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AtmosError::Config(e.to_string()))?;
        cfg.environment.validate()?;
        cfg.powertrain.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| AtmosError::Config(format!("{}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    /// The reference vehicle shipped with the repository.
    pub fn reference() -> Self {
        Self::from_str(REFERENCE_CONFIG).expect("shipped reference config is valid")
    }

    pub fn report(&self) -> Result<SizingReport> {
        build_sizing_report(&self.powertrain, &self.environment)
    }
}

/// Contents of `fixtures/reference.cfg`.
pub const REFERENCE_CONFIG: &str = include_str!("../fixtures/reference.cfg");
