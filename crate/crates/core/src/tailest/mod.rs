//! Tail probabilities, exponent and constant fits, and the estimators built
//! on the boundary localization.

mod constant;
mod feasible;
mod fit;
mod localized;
mod quotient;

pub use constant::*;
pub use feasible::*;
pub use fit::*;
pub use localized::*;
pub use quotient::*;
