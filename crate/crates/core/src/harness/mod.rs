//! Security and overhead validation: attacker equivalences, trace
//! potential, differential noninterference trials and the dummy traffic
//! bound.

mod equiv;
mod ni;
mod overhead;
mod potential;

pub use equiv::{
    equiv_event, equiv_local, equiv_script, equiv_state, equiv_store, equiv_trace, event_mismatch, length_bound_holds,
    phantom_extension_check, trace_diff, EventMismatch, StateCompareError, TraceDiff,
};
pub use ni::{ni_differential_test, trial_seed, Counterexample, Divergence, Mutation, NiConfig, NiReport, TrialRecord};
pub use overhead::{
    check_script_extension, compare_runs, inject_dummies, overhead_check, random_extension, NodeOverhead, OverheadError,
    OverheadReport,
};
pub use potential::{potential_ledger, trace_potential, wf_strategy_online, PotentialError, PotentialLedger, WfViolation};
