pub mod calibrate;
pub mod check;
pub mod export_xes;
pub mod simulate;
pub mod stats;
