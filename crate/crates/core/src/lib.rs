//! Work statistics of driven closed quantum systems.
//!
//! The crate discretizes a protocol `H(t)` on `K + 1` grid points, resolves
//! the Heisenberg-picture power operator at each step, and builds four work
//! distributions from the resulting projectors:
//!
//! * histories, `p(w)`: linear weights `Re Tr[C rho]` of class operators,
//! * measured, `p~(w)`: weights `Tr[C^dagger C rho]` of a continuously
//!   monitored power operator,
//! * two-point measurement (TPM),
//! * Margenau-Hill.
//!
//! ```
//! use workhist::prelude::*;
//!
//! let spec = ProtocolSpec::qubit_drive_quarter_period(1.0, 1.0, 15);
//! let proto = discretize(&spec, 15).unwrap();
//! let rho = thermal_state(proto.initial_hamiltonian(), 0.1).unwrap();
//! let p = histories_distribution(&proto, &rho, &BuildOptions::default()).unwrap();
//! assert_eq!(p.len(), 16);
//! assert!(p.has_negative_bin());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod io;
pub mod operator;
pub mod protocol;
pub mod tol;
pub mod trajectories;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::distributions::{
        build, comparison_report, histories_distribution, jarzynski_report, measured_distribution,
        mh_distribution, time_reversal_check, tpm_distribution, BuildOptions, Kind, Origin,
        WorkDistribution,
    };
    pub use crate::error::{Error, Result};
    pub use crate::operator::{thermal_state, DensityMatrix, HermitianOperator, UnitaryOperator};
    pub use crate::protocol::{discretize, discretize_with, DiscretizedProtocol, ProtocolKind, ProtocolSpec, Schedule};
    pub use crate::trajectories::{enumerate, EnumerationGuard, Method, Trajectory};
}
