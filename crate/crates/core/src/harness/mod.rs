//! Detection, ROC and RMSE evaluation, and the configuration-driven runner.

pub mod detect;
pub mod rmse;
pub mod roc;
pub mod run;

pub use detect::{
    alarms, detect, pareto_frontier, pd_at_pfa, roc_curve, Alarm, DetectorConfig, Grid,
    PairPrediction, RocGrid, RocPoint,
};
pub use rmse::{rmse_csv, rmse_sweep, AnchorLayout, Method, RmseConfig, RmseRow, RMSE_CSV_HEADER};
pub use roc::{
    roc_experiment, roc_frontier_csv, roc_points_csv, RocConfig, RocExperiment, RocResult,
};
pub use run::{
    exit_code, run, run_config, Command, Manifest, RunConfig, RunSummary, SimScenario,
    SimulateConfig,
};
