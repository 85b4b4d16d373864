//! The two-round entrywise function-sum machinery: pluggable function
//! specs, derived protocol parameters, the max-recovery and sum-estimation
//! protocols, and the higher-order correlation reduction.

mod fnspec;
pub mod hoc;
mod params;
mod protocol;

pub use fnspec::{cf_bound, FnSpec, FnSpecError};
pub use hoc::{
    higher_order_correlation, higher_order_correlation_with, hoc_bruteforce, HocError, HocOutcome,
};
pub use params::ProtocolParams;
pub use protocol::{
    estimate_xhat, fk_estimate, fsum_estimate, fsum_estimate_with, recover_max, recover_max_exps,
    round1_server_sample, select_pl, CoordEstimate, CoordinatorView, ExpBackendKind, FsumError,
    Round1Msg,
};
