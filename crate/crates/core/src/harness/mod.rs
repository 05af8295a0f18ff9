//! Scenario files, protocol runners, sweeps and export: everything the
//! `zeno-sta` binary does, callable as a library.

pub mod cli;
pub mod config;
pub mod protocols;
pub mod sweep;
pub mod table;

pub use config::{FamilyChoice, Protocol, ScenarioConfig, SweepAxis, SweepSpec};
pub use protocols::{identity_suite, run_protocol, IdentityReport, Report};
pub use sweep::{fit_loglog, sweep, SlopeFit, SweepResult};
pub use table::{export, Cell, Format, Record, Table};

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParam {
            name: "threads".into(),
            reason: e.to_string(),
        })?;
    Ok(pool.install(f))
}

/// Machine-readable one-line error record.
pub fn error_record(e: &Error) -> String {
    let mut r = Record::new().with("error", e.kind()).with("message", e.to_string());
    if let Error::ConfigInvalid(field) = e {
        r.push("field", field.as_str());
    }
    serde_json::to_string(&r).expect("records always serialize")
}
