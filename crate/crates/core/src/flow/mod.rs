//! Quantum flows: sweeps over coupled active-space problems that share one
//! pool of cluster amplitudes.

mod density;
mod driver;
mod plan;

pub use density::{flow_density, FlowDensity};
pub use driver::{flow_residual, run_flow, FlowResult, FlowTraceRow};
pub use plan::{make_plan, pair_algebras, scsaf_manifold, union_manifold, AmplitudePool, FlowPlan, Ordering};
