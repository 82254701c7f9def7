//! Projection-operator forms, Haar averages over isometries fixing a
//! subspace, and the Cauchy-Schwarz functionals behind the monotone
//! quantities.

mod group;
mod lambda;
mod tensor;

use serde::{Deserialize, Serialize};

use crate::fields::GridSpec;

pub use group::{
    diagonal_subspace, project_invariant, project_invariant_with, sample_group, Interpolation, InvarianceGroup, Sampler,
    MAX_AMBIENT,
};
pub use lambda::{lambda_heat, lambda_heat_derivative, lambda_mehler_terms, MehlerTerms, LOG_MASK};
pub use tensor::{
    diagonal_group, hz_form, hz_form_with, hz_group, modified_nu, modified_rep, modified_rep_with, q66_derivative,
    q66_derivative_with, tensor_form, FormEstimate, FormQuadrature, HzVariant,
};

/// Outcome of comparing a form with the quantity it represents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormReport {
    pub variant: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    #[serde(rename = "K")]
    pub count: usize,
    pub seed: Option<u64>,
    pub grid: GridSpec,
}

impl FormReport {
    pub fn new(variant: impl Into<String>, lhs: f64, rhs: f64, count: usize, seed: Option<u64>, grid: GridSpec) -> Self {
        Self {
            variant: variant.into(),
            lhs,
            rhs,
            rel_err: (rhs - lhs).abs() / lhs.abs(),
            count,
            seed,
            grid,
        }
    }
}
