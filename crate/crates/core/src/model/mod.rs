//! Coefficient sets, concave moduli, test functions and the built-in models.

mod coefficients;
mod modulus;
mod registry;
mod test_function;

pub use coefficients::{CoefficientSet, Coefficients, Envelope, FnCoefficients, SupportTag};
pub use modulus::ModulusSpec;
pub use registry::{build_registry, ModelEntry, Registry};
pub use test_function::TestFunction;
