//! Semiclassical building blocks near a crossing: Weber functions, the local
//! phase frame, leading transport amplitudes, and a check of computed states
//! against their WKB form.

mod crossing;
mod transport;
mod weber;

pub use crossing::{crossing_frame, frame_agmon_mismatch, CrossingFrame, MIN_SLOPE_GAP};
pub use transport::{transport_leading, wkb_state_check, wkb_state_check_with, TransportSolution, WkbCheck, MAX_EXPONENT};
pub use weber::{
    normalization_ratio, weber_full, weber_residual, weber_y, weber_y_eps_derivative, write_weber_csv, WeberEval,
    WeberMethod,
};
