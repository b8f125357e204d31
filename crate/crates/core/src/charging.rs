//! Charging-session front end: expected duration and the number of stress
//! levels implied by an observed session.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EFFICIENCY: f64 = 0.90;
pub const DEFAULT_GRANULARITY_H: f64 = 1.0;

fn default_efficiency() -> f64 {
    DEFAULT_EFFICIENCY
}

fn default_granularity() -> f64 {
    DEFAULT_GRANULARITY_H
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingSession {
    pub battery_capacity_kwh: f64,
    pub initial_soc_pct: f64,
    pub desired_soc_pct: f64,
    pub charging_power_kw: f64,
    #[serde(default = "default_efficiency")]
    pub charging_efficiency: f64,
    pub actual_duration_h: f64,
    /// Width of one stress level in hours.
    #[serde(default = "default_granularity")]
    pub granularity_h: f64,
}

impl ChargingSession {
    pub fn validate(&self) -> Result<()> {
        let check = |field: &str, value: f64, ok: bool, expected: &'static str| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::range(format!("charging.{field}"), value, expected))
            }
        };
        let soc = |v: f64| (0.0..=100.0).contains(&v);
        check(
            "battery_capacity_kwh",
            self.battery_capacity_kwh,
            self.battery_capacity_kwh > 0.0,
            "> 0",
        )?;
        check(
            "initial_soc_pct",
            self.initial_soc_pct,
            soc(self.initial_soc_pct),
            "a percentage in [0, 100]",
        )?;
        check(
            "desired_soc_pct",
            self.desired_soc_pct,
            soc(self.desired_soc_pct) && self.desired_soc_pct >= self.initial_soc_pct,
            "a percentage in [initial_soc_pct, 100]",
        )?;
        check(
            "charging_power_kw",
            self.charging_power_kw,
            self.charging_power_kw > 0.0,
            "> 0",
        )?;
        check(
            "charging_efficiency",
            self.charging_efficiency,
            self.charging_efficiency > 0.0 && self.charging_efficiency <= 1.0,
            "a fraction in (0, 1]",
        )?;
        check(
            "actual_duration_h",
            self.actual_duration_h,
            self.actual_duration_h >= 0.0,
            ">= 0",
        )?;
        check(
            "granularity_h",
            self.granularity_h,
            self.granularity_h > 0.0,
            "> 0",
        )
    }

    pub fn summarize(&self) -> Result<ChargingSummary> {
        self.validate()?;
        let energy_kwh = energy_needed(self);
        let expected_h =
            expected_charging_time(energy_kwh, self.charging_power_kw, self.charging_efficiency)?;
        let stress_levels =
            derive_stress_levels(self.actual_duration_h, expected_h, self.granularity_h)?;
        Ok(ChargingSummary {
            energy_kwh,
            expected_h,
            stress_levels,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargingSummary {
    pub energy_kwh: f64,
    pub expected_h: f64,
    pub stress_levels: usize,
}

/// Energy in kWh needed to move the battery from the initial to the desired
/// state of charge.
pub fn energy_needed(session: &ChargingSession) -> f64 {
    session.battery_capacity_kwh / 100.0 * (session.desired_soc_pct - session.initial_soc_pct)
}

pub fn expected_charging_time(energy_kwh: f64, power_kw: f64, efficiency: f64) -> Result<f64> {
    let effective = power_kw * efficiency;
    if effective == 0.0 {
        return Err(Error::DivisionDomain(
            "charging power times efficiency is zero",
        ));
    }
    Ok(energy_kwh / effective)
}

/// Number of stress levels implied by the extra time a session took.
///
/// The expected time is first rounded to the nearest granularity unit, so a
/// 2.997 h expectation against an 8 h session yields 5 levels. Sessions that
/// took no extra time still get a single baseline level.
pub fn derive_stress_levels(actual_h: f64, expected_h: f64, granularity_h: f64) -> Result<usize> {
    if !(granularity_h > 0.0 && granularity_h.is_finite()) {
        return Err(Error::range("granularity_h", granularity_h, "> 0"));
    }
    let rounded = (expected_h / granularity_h).round() * granularity_h;
    let units = (actual_h - rounded) / granularity_h;
    // guard against 4.000000000001-style float noise before taking the ceiling
    let levels = (units - 1e-9).ceil();
    Ok(if levels < 1.0 { 1 } else { levels as usize })
}
