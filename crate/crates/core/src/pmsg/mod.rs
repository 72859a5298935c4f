//! Single-turbine model.

pub mod control;
pub mod params;
pub mod turbine;

pub use control::{
    control_by_name, current_refs_strategy1, current_refs_strategy2, ControlRegistry, CurrentRefs,
    MitigateOscillation, MitigateUnbalance, SequenceControl,
};
pub use params::{inverse_wind_power, wind_power, PmsgParams, PowerCurve};
pub use turbine::{dc_link_step, ramp_limit, turbine_step, Mode, PmsgState, RampProfile, TurbineModel};
