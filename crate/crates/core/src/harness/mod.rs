//! Sweeps over `h`, width-law fits and the command-line interface.

pub mod cli;
mod config;
mod fit;
mod io;
mod sweep;

pub use config::{CutoffConfig, OutputConfig, SweepConfig, ThetaRule, CONFIG_SCHEMA};
pub use fit::{
    fit_real_part, fit_width_law, least_squares, FitOptions, FitReport, LsqFit, RealPartFit, Verdict, MAX_CONDITION,
    POWER_TOL, RATE_TOL, REALPART_TOL,
};
pub use io::{
    json_string, parse_records_csv, read_records_csv, write_json, write_json_file, write_records_csv, RECORDS_HEADER,
};
pub use sweep::{check_sweep_model, run_sweep, run_sweep_model, SweepRecord};
