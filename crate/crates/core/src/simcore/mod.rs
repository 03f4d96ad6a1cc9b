//! Dense pure-state and mixed-state simulation.
//!
//! Wire 0 is the topmost circuit wire and the most significant bit of every
//! basis index. Global phases are never tracked.

mod channel;
mod gates;
pub(crate) mod kernel;
mod state;

pub use channel::{ChoiMatrix, KrausChannel, SuperOperator, CPTP_REJECT_TOL};
pub use gates::{build_gate, gate_derivative, GateKind, GateMatrix};
pub use state::{MixedState, Observable, PureState, HERMITIAN_TOL, NORM_TOL, PSD_TOL, TRACE_TOL};
