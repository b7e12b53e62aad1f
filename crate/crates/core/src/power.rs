//! Splitting the electrical power budget between the two links.
//!
//! [`wf_allocate`] is the water-filling rule obtained from the KKT
//! conditions with the MMSE replaced by its scaled linear bound, which gives
//! closed-form powers for a fixed budget multiplier `γ`; `γ` is found by
//! bisection. [`lb_allocate`] maximizes the closed-form lower bound, which
//! is concave along the budget line, by comparing the endpoint and interior
//! stationary candidates.

use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, OpticalConstellation, RFConstellation, Symbol};
use crate::error::{Error, Result};
use crate::rate::{lmmse, lmmse_inv, log_pair_sum, sq_dists, LinkPhysics};

/// Electrical and optical power limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerBudget {
    /// Total electrical power `P_T`.
    pub total_elec: f64,
    /// Average optical power limit `P_o`.
    pub max_avg_optical: f64,
    /// Instantaneous optical power limit `P_ins`.
    pub max_inst_optical: f64,
    /// Charge each link `η·P_e` (its cap) instead of `η·ε` (its actual power).
    #[serde(default)]
    pub budget_uses_caps: bool,
}

impl PowerBudget {
    pub fn new(total_elec: f64, max_avg_optical: f64, max_inst_optical: f64) -> Result<Self> {
        let b = PowerBudget {
            total_elec,
            max_avg_optical,
            max_inst_optical,
            budget_uses_caps: false,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_elec >= 0.0 && self.total_elec.is_finite()) {
            return Err(Error::Domain(format!(
                "total electrical power must be nonnegative, got {}",
                self.total_elec
            )));
        }
        for (name, v) in [
            ("average optical power", self.max_avg_optical),
            ("instantaneous optical power", self.max_inst_optical),
        ] {
            if !(v >= 0.0) || v.is_nan() {
                return Err(Error::Domain(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Amplitude cap `τ = min(P_o/μ̄, P_ins/A)` on the optical precoder.
    pub fn tau(&self, c1: &OpticalConstellation) -> f64 {
        let by_mean = if c1.mean_cap() > 0.0 {
            self.max_avg_optical / c1.mean_cap()
        } else {
            f64::INFINITY
        };
        by_mean.min(self.max_inst_optical / c1.peak())
    }

    pub fn tau_sq(&self, c1: &OpticalConstellation) -> f64 {
        self.tau(c1).powi(2)
    }

    /// Budget cost per unit of `q̂` on each link, `(κ1, κ2)`.
    ///
    /// A link whose current power is zero is charged its cap so that the
    /// budget line stays well defined.
    pub fn coefficients(
        &self,
        c1: &OpticalConstellation,
        c2: &RFConstellation,
        phys1: &LinkPhysics,
        phys2: &LinkPhysics,
    ) -> (f64, f64) {
        let pick = |eps: f64, cap: f64| {
            if self.budget_uses_caps || eps <= 0.0 {
                cap
            } else {
                eps
            }
        };
        (
            phys1.amp_efficiency * pick(c1.elec_power(), c1.elec_cap()),
            phys2.amp_efficiency * pick(c2.elec_power(), c2.elec_cap()),
        )
    }
}

/// Precoder powers `q̂1 = q1²`, `q̂2 = |q2|²` and the multipliers of the
/// budget (`γ`) and optical (`ν`) constraints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub q1_sq: f64,
    pub q2_sq: f64,
    pub gamma: f64,
    pub nu: f64,
    /// A closed-form power came out negative and was set to zero.
    #[serde(default)]
    pub clamped: bool,
}

impl PowerAllocation {
    /// Allocation with no multiplier information.
    pub fn fixed(q1_sq: f64, q2_sq: f64) -> Self {
        PowerAllocation {
            q1_sq,
            q2_sq,
            ..Default::default()
        }
    }

    /// Electrical power charged to the budget.
    pub fn budget_used(&self, kappa: (f64, f64)) -> f64 {
        kappa.0 * self.q1_sq + kappa.1 * self.q2_sq
    }

    /// Checks nonnegativity, the budget and the optical cap with absolute
    /// slack `tol`.
    pub fn is_feasible(&self, kappa: (f64, f64), total: f64, tau_sq: f64, tol: f64) -> bool {
        self.q1_sq >= 0.0 && self.q2_sq >= 0.0 && self.budget_used(kappa) <= total + tol && self.q1_sq <= tau_sq + tol
    }
}

/// Everything the allocation rules need about the two links.
#[derive(Debug, Clone, Copy)]
struct Split {
    alpha1: f64,
    alpha2: f64,
    eps1: f64,
    eps2: f64,
    kappa1: f64,
    kappa2: f64,
    tau_sq: f64,
    total: f64,
}

impl Split {
    fn new(
        c1: &OpticalConstellation,
        c2: &RFConstellation,
        phys1: &LinkPhysics,
        phys2: &LinkPhysics,
        budget: &PowerBudget,
    ) -> Result<Self> {
        phys1.validate()?;
        phys2.validate()?;
        budget.validate()?;
        let (kappa1, kappa2) = budget.coefficients(c1, c2, phys1, phys2);
        let (eps1, eps2) = (c1.elec_power(), c2.elec_power());
        Ok(Split {
            alpha1: phys1.alpha(eps1),
            alpha2: phys2.alpha(eps2),
            eps1,
            eps2,
            kappa1,
            kappa2,
            tau_sq: budget.tau_sq(c1),
            total: budget.total_elec,
        })
    }

    fn lifi_live(&self) -> bool {
        self.alpha1 > 0.0 && self.eps1 > 0.0 && self.kappa1 > 0.0
    }

    fn wifi_live(&self) -> bool {
        self.alpha2 > 0.0 && self.eps2 > 0.0 && self.kappa2 > 0.0
    }

    /// Closed-form powers and `ν` for a given `γ`, plus a clamp flag.
    fn powers(&self, gamma: f64) -> (f64, f64, f64, bool) {
        let mut clamped = false;
        let mut nu = 0.0;
        let mut q1 = 0.0;
        if self.lifi_live() && self.tau_sq > 0.0 {
            let y = 2.0 * gamma * self.kappa1 / self.alpha1;
            q1 = match lmmse_inv(self.eps1, y) {
                _ if y <= 0.0 => f64::INFINITY,
                Ok(v) => v / self.alpha1,
                Err(_) => {
                    clamped |= y > self.eps1;
                    0.0
                }
            };
            if q1 > self.tau_sq {
                nu = 0.5 * self.alpha1 * lmmse(self.eps1, self.alpha1 * self.tau_sq) - gamma * self.kappa1;
                q1 = self.tau_sq;
            }
        }
        let mut q2 = 0.0;
        if self.wifi_live() {
            let y = gamma * self.kappa2 / self.alpha2;
            q2 = match lmmse_inv(self.eps2, y) {
                _ if y <= 0.0 => f64::INFINITY,
                Ok(v) => v / self.alpha2,
                Err(_) => {
                    clamped |= y > self.eps2;
                    0.0
                }
            };
        }
        (q1, q2, nu.max(0.0), clamped)
    }

    fn excess(&self, gamma: f64) -> f64 {
        let (q1, q2, _, _) = self.powers(gamma);
        self.kappa1 * q1 + self.kappa2 * q2 - self.total
    }

    /// Smallest `γ` at which both closed-form powers vanish.
    fn gamma_hat(&self) -> f64 {
        let g1 = if self.lifi_live() {
            self.alpha1 * self.eps1 / (2.0 * self.kappa1)
        } else {
            0.0
        };
        let g2 = if self.wifi_live() {
            self.alpha2 * self.eps2 / self.kappa2
        } else {
            0.0
        };
        g1.max(g2)
    }
}

/// Water-filling allocation with the linear-MMSE surrogate.
///
/// Solves `½α1·LMMSE_ε1(α1q̂1) = γκ1 + ν`, `α2·LMMSE_ε2(α2q̂2) = γκ2`
/// with `ν` the smallest value keeping `q̂1 ≤ τ²` and `γ` chosen by
/// bisection until the budget residual is within `tol` (relative). When the
/// budget cannot be exhausted (the optical cap binds and the RF link is
/// dead) the result has `γ = 0` and slack budget.
pub fn wf_allocate(
    c1: &OpticalConstellation,
    c2: &RFConstellation,
    phys1: &LinkPhysics,
    phys2: &LinkPhysics,
    budget: &PowerBudget,
    tol: f64,
) -> Result<PowerAllocation> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let s = Split::new(c1, c2, phys1, phys2, budget)?;
    let hi0 = s.gamma_hat();
    if s.total == 0.0 || hi0 == 0.0 {
        return Ok(PowerAllocation {
            gamma: hi0,
            ..Default::default()
        });
    }

    let mut hi = hi0;
    let mut lo = hi0;
    loop {
        lo *= 0.5;
        if s.excess(lo) > 0.0 {
            break;
        }
        if lo < f64::MIN_POSITIVE {
            // the budget is never used up: γ = 0 with slack budget
            let (q1, q2, nu, clamped) = s.powers(0.0);
            if !q2.is_finite() || !q1.is_finite() {
                return Err(Error::Bracket("no multiplier exhausts the budget".into()));
            }
            return Ok(PowerAllocation {
                q1_sq: q1,
                q2_sq: q2,
                gamma: 0.0,
                nu,
                clamped,
            });
        }
    }

    let scale = s.total;
    for _ in 0..2000 {
        let excess = s.excess(hi);
        if excess.abs() <= tol * scale || (hi - lo) <= 1e-15 * hi {
            break;
        }
        let mid = if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if s.excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(s.excess(hi).abs() <= tol * scale) {
        // excess is discontinuous only at the optical cap; accept the feasible side
        if s.excess(hi) > 0.0 {
            return Err(Error::Bracket("bisection ended on the infeasible side".into()));
        }
    }
    let (q1, q2, nu, clamped) = s.powers(hi);
    Ok(PowerAllocation {
        q1_sq: q1,
        q2_sq: q2,
        gamma: hi,
        nu,
        clamped,
    })
}

/// KKT residuals of the water-filling conditions:
/// `[stationarity1, stationarity2, γ·budget_slack, ν·(q̂1 − τ²)]`.
/// Stationarity is only checked on links that receive power.
pub fn wf_kkt_residuals(
    alloc: &PowerAllocation,
    c1: &OpticalConstellation,
    c2: &RFConstellation,
    phys1: &LinkPhysics,
    phys2: &LinkPhysics,
    budget: &PowerBudget,
) -> Result<[f64; 4]> {
    let s = Split::new(c1, c2, phys1, phys2, budget)?;
    let st1 = if alloc.q1_sq > 0.0 {
        0.5 * s.alpha1 * lmmse(s.eps1, s.alpha1 * alloc.q1_sq) - alloc.gamma * s.kappa1 - alloc.nu
    } else {
        0.0
    };
    let st2 = if alloc.q2_sq > 0.0 {
        s.alpha2 * lmmse(s.eps2, s.alpha2 * alloc.q2_sq) - alloc.gamma * s.kappa2
    } else {
        0.0
    };
    let slack = s.total - s.kappa1 * alloc.q1_sq - s.kappa2 * alloc.q2_sq;
    Ok([st1, st2, alloc.gamma * slack, alloc.nu * (alloc.q1_sq - s.tau_sq)])
}

/// Per-link data for the closed-form lower bound.
struct BoundLink {
    probs: Vec<f64>,
    dists: Vec<f64>,
    /// `w/2 · |g|²/(Bσ²)`: exponent per unit `q̂` and unit squared distance.
    rate: f64,
    /// `c·B`.
    weight: f64,
}

impl BoundLink {
    fn new<C: Constellation>(c: &C, phys: &LinkPhysics) -> Self {
        BoundLink {
            probs: c.probs().to_vec(),
            dists: sq_dists(c.points()),
            rate: 0.5 * <C::Point as Symbol>::EXP_WEIGHT * phys.unit_snr(),
            weight: <C::Point as Symbol>::SAMPLES_PER_HZ * phys.bandwidth,
        }
    }

    /// `c·B·Σ_k p_k log2 Σ_m p_m exp(−rate·q̂·d_km)`.
    fn value(&self, q_sq: f64) -> f64 {
        self.weight * log_pair_sum(&self.probs, &self.dists, self.rate * q_sq)
    }

    /// Derivative of [`value`](Self::value) with respect to `q̂` (≤ 0).
    fn slope(&self, q_sq: f64) -> f64 {
        let k = self.probs.len();
        let t = self.rate * q_sq;
        let mut total = 0.0;
        for (i, pi) in self.probs.iter().enumerate().filter(|(_, p)| **p > 0.0) {
            let row = &self.dists[i * k..(i + 1) * k];
            let mut s = 0.0;
            let mut ds = 0.0;
            for (pm, d) in self.probs.iter().zip(row) {
                let e = pm * (-t * d).exp();
                s += e;
                ds -= self.rate * d * e;
            }
            total += pi * ds / s;
        }
        self.weight * total / std::f64::consts::LN_2
    }
}

/// The one-dimensional lower-bound problem along the budget line.
pub struct LowerBoundLine {
    lifi: BoundLink,
    wifi: BoundLink,
    kappa1: f64,
    kappa2: f64,
    total: f64,
    /// Largest admissible `q̂1`.
    upper: f64,
}

impl LowerBoundLine {
    pub fn new(
        c1: &OpticalConstellation,
        c2: &RFConstellation,
        phys1: &LinkPhysics,
        phys2: &LinkPhysics,
        budget: &PowerBudget,
    ) -> Result<Self> {
        let s = Split::new(c1, c2, phys1, phys2, budget)?;
        let upper = if s.kappa1 > 0.0 {
            s.tau_sq.min(s.total / s.kappa1)
        } else {
            s.tau_sq
        };
        Ok(LowerBoundLine {
            lifi: BoundLink::new(c1, phys1),
            wifi: BoundLink::new(c2, phys2),
            kappa1: s.kappa1,
            kappa2: s.kappa2,
            total: s.total,
            upper: if upper.is_finite() { upper.max(0.0) } else { 0.0 },
        })
    }

    /// Largest admissible `q̂1`: `min(τ², P_T/κ1)`.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// RF power left after giving `q̂1` to the optical link.
    pub fn q2_for(&self, q1_sq: f64) -> f64 {
        if self.kappa2 > 0.0 {
            ((self.total - self.kappa1 * q1_sq) / self.kappa2).max(0.0)
        } else {
            0.0
        }
    }

    /// `Φ(q̂1)`; the lower bound is `(B1 + B2)(1 − 1/ln 2) − Φ`.
    pub fn phi(&self, q1_sq: f64) -> f64 {
        self.lifi.value(q1_sq) + self.wifi.value(self.q2_for(q1_sq))
    }

    /// `−dΦ/dq̂1`: positive where more optical power helps.
    pub fn residual(&self, q1_sq: f64) -> f64 {
        let q2 = self.q2_for(q1_sq);
        let rf = if self.kappa2 > 0.0 && q2 > 0.0 {
            -self.kappa1 / self.kappa2 * self.wifi.slope(q2)
        } else {
            0.0
        };
        -self.lifi.slope(q1_sq) - rf
    }

    /// Interior stationary points found by a 64-interval sign scan and bisection.
    pub fn stationary_points(&self, tol: f64) -> Vec<f64> {
        let u = self.upper;
        if u <= 0.0 {
            return Vec::new();
        }
        let grid: Vec<f64> = (0..=64).map(|i| u * i as f64 / 64.0).collect();
        let mut roots = Vec::new();
        for w in grid.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            let (ra, rb) = (self.residual(a), self.residual(b));
            if ra == 0.0 && a > 0.0 {
                roots.push(a);
                continue;
            }
            if !(ra > 0.0 && rb < 0.0 || ra < 0.0 && rb > 0.0) {
                continue;
            }
            let positive_left = ra > 0.0;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let rm = self.residual(m);
                if rm.abs() <= tol || b - a <= 1e-15 * u {
                    a = m;
                    b = m;
                    break;
                }
                if (rm > 0.0) == positive_left {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        roots
    }
}

/// `Φ(q̂1)` with the RF link taking the rest of the budget.
pub fn lb_phi(
    q1_sq: f64,
    c1: &OpticalConstellation,
    c2: &RFConstellation,
    phys1: &LinkPhysics,
    phys2: &LinkPhysics,
    budget: &PowerBudget,
) -> Result<f64> {
    Ok(LowerBoundLine::new(c1, c2, phys1, phys2, budget)?.phi(q1_sq))
}

/// `−dΦ/dq̂1`; zero at a stationary point.
pub fn lb_stationary_residual(
    q1_sq: f64,
    c1: &OpticalConstellation,
    c2: &RFConstellation,
    phys1: &LinkPhysics,
    phys2: &LinkPhysics,
    budget: &PowerBudget,
) -> Result<f64> {
    Ok(LowerBoundLine::new(c1, c2, phys1, phys2, budget)?.residual(q1_sq))
}

/// Allocation maximizing the lower bound with the budget spent in full.
///
/// Candidates are `q̂1 = 0`, `q̂1 = min(τ², P_T/κ1)` and every interior
/// stationary point; the smallest `Φ` wins. Returns the allocation and `Φ`.
pub fn lb_allocate(
    c1: &OpticalConstellation,
    c2: &RFConstellation,
    phys1: &LinkPhysics,
    phys2: &LinkPhysics,
    budget: &PowerBudget,
    tol: f64,
) -> Result<(PowerAllocation, f64)> {
    let line = LowerBoundLine::new(c1, c2, phys1, phys2, budget)?;
    let mut candidates = vec![0.0];
    candidates.extend(line.stationary_points(tol));
    candidates.push(line.upper());
    let mut best = (0.0, line.phi(0.0));
    for q in candidates {
        let v = line.phi(q);
        if v < best.1 {
            best = (q, v);
        }
    }
    let alloc = PowerAllocation::fixed(best.0, line.q2_for(best.0));
    Ok((alloc, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_pam, make_qam};
    use crate::rate::bounds_aggregate;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn unit_scenario(
        total: f64,
        tau: f64,
    ) -> (
        OpticalConstellation,
        RFConstellation,
        LinkPhysics,
        LinkPhysics,
        PowerBudget,
    ) {
        // {0, √2} has unit power; peak √2 and mean cap 1/√2 make τ = P_ins/√2
        let c1 = make_pam(2, 2f64.sqrt(), 1.0, 1.0).unwrap();
        let c2 = make_qam(4, 1.0).unwrap();
        let phys = LinkPhysics::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let budget = PowerBudget::new(total, 1e9, tau * 2f64.sqrt()).unwrap();
        (c1, c2, phys, phys, budget)
    }

    #[test]
    fn water_filling_unit_case() {
        let (c1, c2, p1, p2, b) = unit_scenario(4.0, 1e6);
        let a = wf_allocate(&c1, &c2, &p1, &p2, &b, 1e-12).unwrap();
        assert_relative_eq!(a.q1_sq, 1.0, epsilon = 1e-9);
        assert_relative_eq!(a.q2_sq, 3.0, epsilon = 1e-9);
        assert_eq!(a.nu, 0.0);
        let r = wf_kkt_residuals(&a, &c1, &c2, &p1, &p2, &b).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-10), "{r:?}");
    }

    #[test]
    fn water_filling_closed_optical_cap() {
        let (c1, c2, p1, p2, b) = unit_scenario(4.0, 0.0);
        let a = wf_allocate(&c1, &c2, &p1, &p2, &b, 1e-12).unwrap();
        assert_eq!(a.q1_sq, 0.0);
        assert_relative_eq!(a.q2_sq, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn water_filling_binding_cap_sets_nu() {
        let (c1, c2, p1, p2, b) = unit_scenario(4.0, 0.5);
        let a = wf_allocate(&c1, &c2, &p1, &p2, &b, 1e-12).unwrap();
        assert_relative_eq!(a.q1_sq, 0.25, epsilon = 1e-12);
        assert_relative_eq!(a.q2_sq, 3.75, epsilon = 1e-9);
        assert!(a.nu > 0.0);
        let r = wf_kkt_residuals(&a, &c1, &c2, &p1, &p2, &b).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9), "{r:?}");
    }

    #[test]
    fn water_filling_zero_budget() {
        let (c1, c2, p1, p2, b) = unit_scenario(0.0, 1.0);
        let a = wf_allocate(&c1, &c2, &p1, &p2, &b, 1e-9).unwrap();
        assert_eq!((a.q1_sq, a.q2_sq), (0.0, 0.0));
    }

    #[test]
    fn water_filling_matches_surrogate_grid() {
        // strong optical link, weak RF link
        let c1 = make_pam(4, 1.0, 1.0, 1.0).unwrap();
        let c2 = make_qam(16, 1.0).unwrap();
        let p1 = LinkPhysics::new(30.0, 1.0, 1.0, 1.0).unwrap();
        let p2 = LinkPhysics::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let b = PowerBudget::new(2.0, 1e9, 1e9).unwrap();
        let a = wf_allocate(&c1, &c2, &p1, &p2, &b, 1e-12).unwrap();
        let (k1, k2) = b.coefficients(&c1, &c2, &p1, &p2);
        let (e1, e2) = (c1.elec_power(), c2.elec_power());
        let (a1, a2) = (p1.alpha(e1), p2.alpha(e2));
        // surrogate rate whose derivatives are the linear-MMSE expressions
        let h = |q1: f64, q2: f64| 0.5 * (1.0 + e1 * a1 * q1).ln() + (1.0 + e2 * a2 * q2).ln();
        let steps = 10_000;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=steps {
            let q1 = b.total_elec / k1 * i as f64 / steps as f64;
            let q2 = (b.total_elec - k1 * q1) / k2;
            let v = h(q1, q2);
            if v > best.0 {
                best = (v, q1);
            }
        }
        assert!((a.q1_sq - best.1).abs() <= 2e-4 * b.total_elec / k1);
        assert!(h(a.q1_sq, a.q2_sq) >= best.0 - 1e-12);
    }

    #[test]
    fn degenerate_links_in_water_filling() {
        let c1 = make_pam(1, 1.0, 1.0, 1.0).unwrap();
        let c2 = make_qam(16, 1.0).unwrap();
        let p = LinkPhysics::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let b = PowerBudget::new(3.0, 10.0, 10.0).unwrap();
        let a = wf_allocate(&c1, &c2, &p, &p, &b, 1e-12).unwrap();
        assert_eq!(a.q1_sq, 0.0);
        assert_relative_eq!(a.q2_sq, 3.0, epsilon = 1e-9);

        // RF dead and optical cap binding: budget left over, γ = 0
        let c1 = make_pam(2, 2f64.sqrt(), 1.0, 1.0).unwrap();
        let c2 = make_qam(1, 1.0).unwrap();
        let b = PowerBudget::new(3.0, 1e9, 2f64.sqrt()).unwrap();
        let a = wf_allocate(&c1, &c2, &p, &p, &b, 1e-12).unwrap();
        assert_relative_eq!(a.q1_sq, 1.0, epsilon = 1e-12);
        assert_eq!(a.gamma, 0.0);
    }

    fn table_like() -> (
        OpticalConstellation,
        RFConstellation,
        LinkPhysics,
        LinkPhysics,
        PowerBudget,
    ) {
        let c1 = make_pam(8, 1.0, 0.5, 1.0).unwrap();
        let c2 = make_qam(16, 1.0).unwrap();
        let p1 = LinkPhysics::new(4.476e-6, 40e6, 1e-21, 1.0).unwrap();
        let p2 = LinkPhysics::new(3.05e-6f64.sqrt(), 20e6, 2e-15, 1.0).unwrap();
        let b = PowerBudget::new(1.0, 0.8, 1.0).unwrap();
        (c1, c2, p1, p2, b)
    }

    #[test]
    fn phi_endpoints_and_bounds() {
        let (c1, c2, p1, p2, b) = table_like();
        let line = LowerBoundLine::new(&c1, &c2, &p1, &p2, &b).unwrap();
        let (k1, k2) = b.coefficients(&c1, &c2, &p1, &p2);
        let gap = (p1.bandwidth + p2.bandwidth) * (1.0 - 1.0 / LN_2);
        for q1 in [0.0, 0.3 * line.upper(), line.upper()] {
            let q2 = (b.total_elec - k1 * q1) / k2;
            let (lower, _) = bounds_aggregate(&c1, &c2, q1, q2, &p1, &p2);
            assert_relative_eq!(gap - line.phi(q1), lower, max_relative = 1e-12);
        }
    }

    #[test]
    fn residual_is_negative_derivative() {
        let (c1, c2, p1, p2, b) = table_like();
        let line = LowerBoundLine::new(&c1, &c2, &p1, &p2, &b).unwrap();
        for f in [0.1, 0.4, 0.8] {
            let q = f * line.upper();
            let h = 1e-6 * line.upper();
            let fd = -(line.phi(q + h) - line.phi(q - h)) / (2.0 * h);
            assert_relative_eq!(line.residual(q), fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn dead_rf_link_prefers_optical() {
        let c1 = make_pam(4, 1.0, 1.0, 1.0).unwrap();
        let c2 = make_qam(1, 1.0).unwrap();
        let p = LinkPhysics::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let b = PowerBudget::new(2.0, 0.5, 1.0).unwrap();
        let line = LowerBoundLine::new(&c1, &c2, &p, &p, &b).unwrap();
        for i in 1..10 {
            assert!(line.residual(line.upper() * i as f64 / 10.0) > 0.0);
        }
        let (a, _) = lb_allocate(&c1, &c2, &p, &p, &b, 1e-12).unwrap();
        assert_relative_eq!(a.q1_sq, line.upper(), epsilon = 1e-15);

        let c1 = make_pam(1, 1.0, 1.0, 1.0).unwrap();
        let c2 = make_qam(4, 1.0).unwrap();
        let (a, _) = lb_allocate(&c1, &c2, &p, &p, &b, 1e-12).unwrap();
        assert_eq!(a.q1_sq, 0.0);
        assert_relative_eq!(a.q2_sq, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn lb_allocate_matches_grid() {
        let (c1, c2, p1, p2, b) = table_like();
        let (a, phi) = lb_allocate(&c1, &c2, &p1, &p2, &b, 1e-12).unwrap();
        let line = LowerBoundLine::new(&c1, &c2, &p1, &p2, &b).unwrap();
        let (k1, k2) = b.coefficients(&c1, &c2, &p1, &p2);
        assert_relative_eq!(k1 * a.q1_sq + k2 * a.q2_sq, b.total_elec, max_relative = 1e-12);
        let grid_min = (0..=10_000)
            .map(|i| line.phi(line.upper() * i as f64 / 10_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(phi <= grid_min + 1e-9 * grid_min.abs());
        assert!(phi >= grid_min - 1e-3 * grid_min.abs());
    }
}
