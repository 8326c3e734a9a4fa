//! Repeated replay of current profiles with degradation, baseline fitting and
//! baseline-normalized health reports.

mod baseline;
mod replay;

pub use baseline::{
    fit_baselines, motion_report, normalize, normalize_metric, plot_data, BaselineFit, ComparisonRow,
    ComparisonTable, LinearFit, Metric, NormalizedMetric, TABLE_COLUMNS,
};
pub use replay::{
    capacity_check, replay, replay_many, replay_with_traces, HealthReport, RechargePolicy, ReplayOptions,
    TemperatureStats,
};
