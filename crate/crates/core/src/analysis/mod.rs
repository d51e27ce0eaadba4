//! Closed-form statistical predictions for DMP.
//!
//! * [`gamma`]: Gamma fits for the QoS power of one SU and for the sum
//!   power of a set, plus the stochastic-dominance gap between set sizes.
//! * [`cf`]: achieved-rate CCDF by characteristic-function inversion.
//! * [`recursion`]: probability of reaching each set during DMP and the
//!   resulting expected served users, satisfied users and PR interference.
//!
//! Every prediction is conditioned on a [`Geometry`](crate::channel::Geometry)
//! (the slow-fading coefficients); the small-scale fading is averaged out.

pub mod cf;
pub mod gamma;
pub mod quad;
pub mod recursion;

use serde::{Deserialize, Serialize};

pub use cf::{gil_pelaez_cdf, rate_ccdf, CfKind, CfTerm};
pub use gamma::{dominance_cdf_gap, power_fit, sum_power_fit, GammaParams, PowerFit, PowerLaw};
pub use recursion::{
    expected_interference, expected_satisfied, expected_selected, prob_drop, prob_feasible, reach_prob, Prediction,
    ReachTable, RECURSION_GUARD,
};

/// Which DMP variant the prediction describes. With update, powers in a
/// set S are fitted with `|S|` co-scheduled users; without update, every
/// power keeps its `S0` law (K co-scheduled users).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WithUpdate,
    WithoutUpdate,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::WithUpdate, Mode::WithoutUpdate];

    /// Number of co-scheduled SUs the beams of a set of `set_size` null.
    pub fn effective_size(self, set_size: usize, users: usize) -> usize {
        match self {
            Mode::WithUpdate => set_size,
            Mode::WithoutUpdate => users,
        }
    }

    /// The simulated algorithm this mode predicts.
    pub fn algorithm(self) -> crate::select::Algorithm {
        match self {
            Mode::WithUpdate => crate::select::Algorithm::Dmp,
            Mode::WithoutUpdate => crate::select::Algorithm::DmpNvu,
        }
    }
}
