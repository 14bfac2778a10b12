//! Desk-scale efficiency harness: latency/throughput sweeps over sequence
//! length, log-log slope extraction, an oracle verification suite, and CSV
//! emission. Scaling claims are asserted as machine-relative ratios only.

mod csv;
mod slope;
mod sweep;
mod verify;

pub use csv::{emit_csv, write_csv};
pub use slope::{slope_fit, SlopeFit};
pub use sweep::{run_sweep, run_sweep_parallel, KernelKind, SweepRow, SweepSpec};
pub use verify::{run_verify, verify_cache_coherence, CheckResult, VerifyConfig};
