use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the machine-side power curve between cut-in and rated wind speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerCurve {
    /// `(v / v_rated)^3`
    #[default]
    Cubic,
    /// Piecewise-linear manufacturer data, `[wind speed m/s, power p.u.]`.
    Table { points: Vec<[f64; 2]> },
}

/// Nameplate and control constants of one turbine. Currents, powers and
/// voltages are per-unit on the machine base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmsgParams {
    /// MVA
    pub s_rated: f64,
    /// Rated current.
    pub i_n: f64,
    /// Converter current limit.
    pub i_max: f64,
    /// Positive-sequence reactive current factor.
    pub k_pos: f64,
    /// Negative-sequence reactive current factor.
    pub k_neg: f64,
    /// Maximum recovery rate of the d-axis current after clearance, p.u./s.
    pub ramp_k: f64,
    pub v_cut_in: f64,
    pub v_rated: f64,
    pub x_stator: f64,
    pub r_stator: f64,
    /// Turbine inertia time constant, s.
    pub h_turbine: f64,
    /// Generator inertia time constant, s.
    pub h_generator: f64,
    /// DC-link capacitance constant, p.u.·s.
    pub c_dc: f64,
    pub v_dc_ref: f64,
    pub chopper_on: f64,
    pub chopper_off: f64,
    pub pi_kp: f64,
    pub pi_ki: f64,
    pub power_curve: PowerCurve,
}

impl Default for PmsgParams {
    fn default() -> Self {
        Self {
            s_rated: 1.5,
            i_n: 1.0,
            i_max: 1.1,
            k_pos: 2.0,
            k_neg: 2.0,
            ramp_k: 1.0,
            v_cut_in: 3.0,
            v_rated: 12.0,
            x_stator: 0.1,
            r_stator: 0.005,
            h_turbine: 4.0,
            h_generator: 0.6,
            c_dc: 0.1,
            v_dc_ref: 1.0,
            chopper_on: 1.1,
            chopper_off: 1.05,
            pi_kp: 5.0,
            pi_ki: 50.0,
            power_curve: PowerCurve::Cubic,
        }
    }
}

impl PmsgParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s_rated", self.s_rated),
            ("i_n", self.i_n),
            ("ramp_k", self.ramp_k),
            ("h_turbine", self.h_turbine),
            ("h_generator", self.h_generator),
            ("c_dc", self.c_dc),
            ("v_dc_ref", self.v_dc_ref),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation("positive-parameter", format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.i_n <= self.i_max) {
            return Err(Error::validation("current-limit", "require 0 < i_n <= i_max"));
        }
        if !(self.k_pos >= 0.0 && self.k_neg >= 0.0) {
            return Err(Error::validation("reactive-factors", "k_pos and k_neg must be >= 0"));
        }
        if !(0.0 <= self.v_cut_in && self.v_cut_in < self.v_rated) {
            return Err(Error::validation("wind-speeds", "require 0 <= v_cut_in < v_rated"));
        }
        if !(self.chopper_off < self.chopper_on) {
            return Err(Error::validation("chopper-band", "require chopper_off < chopper_on"));
        }
        if !(self.pi_kp >= 0.0 && self.pi_ki >= 0.0) {
            return Err(Error::validation("pi-gains", "PI gains must be >= 0"));
        }
        if let PowerCurve::Table { points } = &self.power_curve {
            if points.len() < 2 {
                return Err(Error::validation("power-curve", "table needs at least two points"));
            }
            for w in points.windows(2) {
                if !(w[1][0] > w[0][0]) || w[1][1] < w[0][1] {
                    return Err(Error::validation(
                        "power-curve",
                        "table must be strictly increasing in wind speed and non-decreasing in power",
                    ));
                }
            }
            if points.iter().any(|p| !(0.0..=1.0).contains(&p[1])) {
                return Err(Error::validation("power-curve", "table powers must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

fn interpolate(points: &[[f64; 2]], v: f64) -> f64 {
    if v <= points[0][0] {
        return points[0][1];
    }
    for w in points.windows(2) {
        let ([v0, p0], [v1, p1]) = (w[0], w[1]);
        if v <= v1 {
            return p0 + (p1 - p0) * (v - v0) / (v1 - v0);
        }
    }
    points[points.len() - 1][1]
}

/// Machine-side power at wind speed `v_w`: zero below cut-in, the curve up to
/// rated, and the rated plateau above it.
pub fn wind_power(v_w: f64, params: &PmsgParams) -> f64 {
    if v_w < params.v_cut_in {
        0.0
    } else if v_w >= params.v_rated {
        1.0
    } else {
        match &params.power_curve {
            PowerCurve::Cubic => (v_w / params.v_rated).powi(3),
            PowerCurve::Table { points } => interpolate(points, v_w).clamp(0.0, 1.0),
        }
    }
}

/// Wind speed producing `p`, clamped to `[v_cut_in, v_rated]`.
pub fn inverse_wind_power(p: f64, params: &PmsgParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange { value: p, range: "[0, 1]" });
    }
    let v = match &params.power_curve {
        PowerCurve::Cubic => params.v_rated * p.cbrt(),
        PowerCurve::Table { points } => {
            let mut v = points[points.len() - 1][0];
            for w in points.windows(2) {
                let ([v0, p0], [v1, p1]) = (w[0], w[1]);
                if p <= p0 {
                    v = v0;
                    break;
                }
                if p <= p1 {
                    v = v0 + (v1 - v0) * (p - p0) / (p1 - p0);
                    break;
                }
            }
            v
        }
    };
    Ok(v.clamp(params.v_cut_in, params.v_rated))
}
