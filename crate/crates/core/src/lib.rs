pub mod error;
pub mod field;
pub mod integrator;
pub mod ladder;
pub mod functionals;
pub mod portrait;
pub mod quadrature;
pub mod roots;
pub mod verify;
pub mod io;
pub mod cli;

pub use error::{LabError, Result};
pub use field::{CriticalAmplitudes, FieldParams};
pub use integrator::{integrate, IntegratorControls, ProblemParams, State, StopPolicy, TerminationCause, Trajectory};
pub use portrait::{count_nodes, detect_events, PhaseKind, PhaseLabels, PhasePortrait};
