//! Diagnostics for trained models: reconstruction sweeps, periods, phase speeds,
//! smoothness across chart transitions and long-time bursting behaviour.

mod bursting;
mod period;
mod report;
mod smoothness;
mod sweep;
mod torus;

pub use bursting::{
    burst_events, canonical_cycle, classify_bursting_behavior, classify_bursting_ensemble, classify_symbols,
    symbol_period, BurstEvent, BurstingAnalysis, BurstingOptions, BurstingVerdict,
};
pub use period::{
    estimate_period, estimate_period_with, linear_slope, travelling_period, PeriodEstimate, PeriodOptions,
    Periodicity,
};
pub use report::*;
pub use smoothness::{transition_smoothness, SmoothnessReport, TransitionJump};
pub use sweep::{cell_config, match_parameters, mse_sweep, widen, with_latent_dim, ArchPolicy, MseSweepResult, SweepRow};
pub use torus::{
    phase_speed_error, torus_angle_series, torus_angles, PhaseSpeedError, TorusAngles, ANGLE_RECOVERY_TOLERANCE,
};
