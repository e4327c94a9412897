//! Studies on top of `ranslice-core`: scenario files, record output,
//! analytic-versus-simulation validation and configuration sweeps.

pub mod output;
pub mod scenario;
pub mod sweep;
pub mod validation;
