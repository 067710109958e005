pub mod error;
pub mod herm;
pub mod scalar;
pub mod generate;
pub mod regularizer;

mod ascent;
pub mod report;
pub mod balanced;
pub mod unbalanced;
pub mod primal;
pub mod lab;

pub use ascent::AscentOptions;
pub use error::{QotError, Result};
pub mod selftest;

pub use balanced::BalancedInstance;
pub use herm::{HermitianOperator, ProductSpace};
pub use regularizer::Regularizer;
pub use report::{DualPotentials, SolveReport};
pub use scalar::{Extended, Real};
pub use unbalanced::UnbalancedInstance;

pub type Hermitian = HermitianOperator<f64>;
pub type Hermitian32 = HermitianOperator<f32>;
pub type Balanced = BalancedInstance<f64>;
pub type Unbalanced = UnbalancedInstance<f64>;
pub type Potentials = DualPotentials<f64>;
pub type Report = SolveReport<f64>;
pub type Reg = Regularizer<f64>;
