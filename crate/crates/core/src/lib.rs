// Guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod flows;
pub mod forms;
pub mod monotone;
pub mod norms;
pub mod numeric;

pub use error::{Error, Result};
pub use fields::{make_grid, tensor_product, Field, GridSpec};
