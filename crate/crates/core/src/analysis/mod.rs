//! Mercer reconstructions, error decomposition and spectral functionals.

pub mod decomposition;
pub mod functionals;
pub mod mercer;

pub use decomposition::{
    error_decomposition, gap_condition_check, success_probability, truncation_error_e1,
    ErrorReport, ParameterRecord, SuccessProbability,
};
pub use functionals::{g_functional, h_functional, SpectralFunctionals};
pub use mercer::{kernel_l2_distance, truncate_model, truncate_system, Factors, MercerKernel};
