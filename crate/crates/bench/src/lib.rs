//! Shared fixtures for the benchmarks.

use aggrate_core::{make_pam, make_qam, LinkPhysics, OpticalConstellation, Problem, RFConstellation, Scenario};

/// Equiprobable 8-PAM and 16-QAM with the reference caps.
pub fn reference_pair() -> (OpticalConstellation, RFConstellation) {
    (make_pam(8, 1.0, 0.5, 1.0).unwrap(), make_qam(16, 1.0).unwrap())
}

/// Unit-bandwidth link with SNR `snr` at `q̂ = 1` for symbol power `eps`.
pub fn link_at(snr: f64, eps: f64) -> LinkPhysics {
    LinkPhysics::new((snr / eps).sqrt(), 1.0, 1.0, 1.0).unwrap()
}

/// The built-in reference scenario as an optimization problem.
pub fn reference_problem() -> Problem {
    Scenario::default().problem().unwrap()
}
