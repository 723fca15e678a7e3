//! Time Window Temporal Logic: parsing, Boolean and quantitative semantics,
//! and online robustness monitors.
//!
//! ```
//! use twtl::formula::parse;
//! use twtl::semantics::{rho, EvalConfig};
//! use twtl::trace::{Comparison, PredicateSpec, PredicateTable, Word};
//!
//! let f = parse("H^2 A").unwrap();
//! let table: PredicateTable = [PredicateSpec::half_space("A", "x", Comparison::AtLeast, 4.0)]
//!     .into_iter()
//!     .collect();
//! let w = Word::from_samples("x", &[5.0, 4.5, 6.0]).unwrap();
//! assert_eq!(rho(&w, &f, &table, &EvalConfig::default()).unwrap(), 0.5);
//! ```

pub mod formula;
pub mod monitor;
pub mod oracle;
pub mod semantics;
pub mod trace;

pub use formula::{format, horizon, parse, validate, Formula};
pub use monitor::{eta_interval, rho_interval, Monitor, Prefix, RobustnessInterval, Verdict};
pub use semantics::{bool_sat, eta, rho, EvalConfig};
pub use trace::{PredicateSpec, PredicateTable, Word};
