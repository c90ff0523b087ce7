use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cubic wind-farm power curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindTurbineCurve {
    /// Rated power (MW).
    pub rated_power: f64,
    /// Cut-in speed (m/s).
    #[serde(default = "default_cut_in")]
    pub cut_in: f64,
    /// Rated speed (m/s).
    #[serde(default = "default_rated_speed")]
    pub rated_speed: f64,
    /// Cut-out speed (m/s).
    #[serde(default = "default_cut_out")]
    pub cut_out: f64,
}

fn default_cut_in() -> f64 {
    3.0
}
fn default_rated_speed() -> f64 {
    12.0
}
fn default_cut_out() -> f64 {
    25.0
}

impl WindTurbineCurve {
    /// Curve with 3 / 12 / 25 m/s cut-in, rated and cut-out speeds.
    pub fn with_rated_power(rated_power: f64) -> Self {
        WindTurbineCurve {
            rated_power,
            cut_in: default_cut_in(),
            rated_speed: default_rated_speed(),
            cut_out: default_cut_out(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rated_power > 0.0
            && 0.0 < self.cut_in
            && self.cut_in < self.rated_speed
            && self.rated_speed < self.cut_out
            && self.cut_out.is_finite()
            && self.rated_power.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "wind curve needs P_r > 0 and 0 < v_in < v_r < v_out (got {self:?})"
            )))
        }
    }

    /// Output power (MW) at wind speed `v` (m/s).
    pub fn power(&self, v: f64) -> f64 {
        if v < self.cut_in || v > self.cut_out {
            0.0
        } else if v >= self.rated_speed {
            self.rated_power
        } else {
            let vi3 = self.cut_in.powi(3);
            self.rated_power * (v.powi(3) - vi3) / (self.rated_speed.powi(3) - vi3)
        }
    }
}

pub fn wind_power(curve: &WindTurbineCurve, v: f64) -> f64 {
    curve.power(v)
}
