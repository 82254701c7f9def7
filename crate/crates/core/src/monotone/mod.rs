//! Scans of monotone quantities over time grids, derivative cross-checks
//! and sharp-constant reports.

mod check;
mod data;
mod scan;

pub use check::{
    constants_report, derivative_check, ConstantReport, DerivativeIdentity, DerivativeNode, DerivativeReport,
    GridQuality, FD_STEP,
};
pub use data::{reflect, DataSource};
pub use scan::{limit_check, scan, GridKind, LimitCheck, Quantity, ScanConfig, Triple};
