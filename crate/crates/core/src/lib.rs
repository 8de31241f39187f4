//! Exact q-series identities, eta quotient evaluation on the imaginary axis,
//! double-exponential quadrature and L-value transformation routes.

pub mod identities;
pub mod modular_eval;
pub mod qseries;
pub mod quadrature;
pub mod transform;

pub use identities::{Identity, IdentityReport, Verdict};
pub use modular_eval::{EvalResult, DEFAULT_PREC};
pub use qseries::{ArithmeticSequence, EisensteinLikeSeries, EtaQuotient, QSeries, SequenceKind};
pub use quadrature::{IntegralResult, QuadConfig};
pub use transform::{Route, RouteValue, TransformReport, TransformSpec};
