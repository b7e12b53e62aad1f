//! Achievable rates of the optical and RF links with finite-alphabet inputs.
//!
//! Distances are measured in noise units: for a link with gain `g`,
//! bandwidth `B`, noise density `σ²` and precoder power `q̂`, symbol pairs
//! are separated by `δ_km = √(q̂|g|²/(Bσ²))·(x_k − x_m)`. The rate is
//!
//! ```text
//! R = −c·B·Σ_k p_k E log2 Σ_m p_m exp(−w(|δ_km|² + 2 Re(δ_km* n)))
//! ```
//!
//! with `n` standard (real or circular complex) Gaussian noise, `w` the
//! symbol's [`Symbol::EXP_WEIGHT`] and `c` its [`Symbol::SAMPLES_PER_HZ`].
//! This is the usual form with the `exp(−w|n|²)` factor cancelled against
//! the leading `−B/ln 2` term, which keeps the log-sums well conditioned.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, OpticalConstellation, RFConstellation, Symbol};
use crate::error::{Error, Result};
use crate::quadrature::{Estimate, NoiseDomain, NoiseRule, QuadratureSpec};

/// Gain, bandwidth, noise and amplifier efficiency of one link.
///
/// `gain` is the magnitude `|g|`; the RF precoder phase is matched to the
/// channel phase, so only the magnitude enters any rate expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkPhysics {
    pub gain: f64,
    pub bandwidth: f64,
    pub noise_psd: f64,
    pub amp_efficiency: f64,
}

impl LinkPhysics {
    pub fn new(gain: f64, bandwidth: f64, noise_psd: f64, amp_efficiency: f64) -> Result<Self> {
        let p = LinkPhysics {
            gain,
            bandwidth,
            noise_psd,
            amp_efficiency,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(Error::Domain(format!(
                "gain must be finite and nonnegative, got {}",
                self.gain
            )));
        }
        if !positive(self.bandwidth) {
            return Err(Error::Domain(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if !positive(self.noise_psd) {
            return Err(Error::Domain(format!(
                "noise density must be positive, got {}",
                self.noise_psd
            )));
        }
        if !positive(self.amp_efficiency) {
            return Err(Error::Domain(format!(
                "amplifier efficiency must be positive, got {}",
                self.amp_efficiency
            )));
        }
        Ok(())
    }

    /// `|g|²/(Bσ²)`: SNR per unit of precoder power and symbol power.
    pub fn unit_snr(&self) -> f64 {
        self.gain * self.gain / (self.bandwidth * self.noise_psd)
    }

    /// `α = |g|²ε/(Bσ²)`, the SNR per unit of `q̂`.
    pub fn alpha(&self, elec_power: f64) -> f64 {
        self.unit_snr() * elec_power
    }

    /// `|g|²q̂ε/(Bσ²)`.
    pub fn snr(&self, q_sq: f64, elec_power: f64) -> f64 {
        self.alpha(elec_power) * q_sq
    }

    /// Scale turning symbol differences into noise-normalized distances.
    pub fn distance_scale(&self, q_sq: f64) -> f64 {
        (q_sq * self.unit_snr()).sqrt()
    }
}

/// Pairwise quantities shared by the rate, its gradient and the MMSE.
pub(crate) struct Kernel<S> {
    k: usize,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    /// `δ_km` row-major.
    delta: Vec<S>,
    /// `−w|δ_km|²` row-major.
    base: Vec<f64>,
}

impl<S: Symbol> Kernel<S> {
    pub(crate) fn new(points: &[S], probs: &[f64], scale: f64) -> Self {
        let k = points.len();
        let mut delta = Vec::with_capacity(k * k);
        let mut base = Vec::with_capacity(k * k);
        for xk in points {
            for xm in points {
                let d = xk.diff(*xm).scaled(scale);
                delta.push(d);
                base.push(-S::EXP_WEIGHT * d.energy());
            }
        }
        Kernel {
            k,
            probs: probs.to_vec(),
            log_probs: probs
                .iter()
                .map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                .collect(),
            delta,
            base,
        }
    }

    /// Exponent `e_km(n)`.
    #[inline]
    fn exponent(&self, idx: usize, n: S) -> f64 {
        self.base[idx] - 2.0 * S::EXP_WEIGHT * self.delta[idx].re_dot(n)
    }

    /// `ln Σ_m p_m exp(e_km(n))` for row `k`.
    fn log_sum(&self, k: usize, n: S) -> f64 {
        let row = k * self.k;
        let mut peak = f64::NEG_INFINITY;
        for m in 0..self.k {
            if self.probs[m] > 0.0 {
                peak = peak.max(self.log_probs[m] + self.exponent(row + m, n));
            }
        }
        let mut acc = 0.0;
        for m in 0..self.k {
            if self.probs[m] > 0.0 {
                acc += (self.log_probs[m] + self.exponent(row + m, n) - peak).exp();
            }
        }
        peak + acc.ln()
    }

    /// `Σ_k p_k ln Σ_m p_m exp(e_km(n))`, which is `−I` in nats at one noise sample.
    pub(crate) fn neg_info_at(&self, n: S) -> f64 {
        (0..self.k)
            .filter(|&k| self.probs[k] > 0.0)
            .map(|k| self.probs[k] * self.log_sum(k, n))
            .sum()
    }

    /// Gradient of `neg_info_at` with respect to `p`:
    /// `L_i(n) + Σ_k p_k exp(e_ki(n) − L_k(n))`.
    pub(crate) fn neg_info_grad_at(&self, n: S, out: &mut [f64]) {
        let logs: Vec<f64> = (0..self.k).map(|k| self.log_sum(k, n)).collect();
        out.copy_from_slice(&logs);
        for k in (0..self.k).filter(|&k| self.probs[k] > 0.0) {
            let row = k * self.k;
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.probs[k] * (self.exponent(row + i, n) - logs[k]).exp();
            }
        }
    }

    /// Squared error of the conditional-mean estimate for symbol `k`,
    /// in units of the scaled symbols `δ`.
    fn estimate_error_at(&self, k: usize, n: S) -> f64 {
        let row = k * self.k;
        let lse = self.log_sum(k, n);
        let mut err = S::zero();
        for m in 0..self.k {
            if self.probs[m] > 0.0 {
                let r = (self.log_probs[m] + self.exponent(row + m, n) - lse).exp();
                // δ_km = s(x_k − x_m); the estimate error is Σ_m r_m (x_m − x_k)
                err = err + self.delta[row + m].scaled(-r);
            }
        }
        err.energy()
    }
}

/// Mutual information per channel use, in bits, at precoder power `q_sq`.
pub fn info_bits<C>(c: &C, q_sq: f64, phys: &LinkPhysics, rule: &NoiseRule<C::Point>) -> Estimate
where
    C: Constellation,
    C::Point: NoiseDomain,
{
    let scale = phys.distance_scale(q_sq.max(0.0));
    if c.order() < 2 || scale == 0.0 {
        return Estimate::default();
    }
    let kernel = Kernel::new(c.points(), c.probs(), scale);
    let e = rule.expect(|n| kernel.neg_info_at(n));
    Estimate {
        value: (-e.value / LN_2).max(0.0),
        std_err: e.std_err / LN_2,
    }
}

/// Achievable rate of a link in bits/s with a prebuilt noise rule.
pub fn link_rate_with<C>(c: &C, q_sq: f64, phys: &LinkPhysics, rule: &NoiseRule<C::Point>) -> Estimate
where
    C: Constellation,
    C::Point: NoiseDomain,
{
    let factor = <C::Point as Symbol>::SAMPLES_PER_HZ * phys.bandwidth;
    let e = info_bits(c, q_sq, phys, rule);
    Estimate {
        value: factor * e.value,
        std_err: factor * e.std_err,
    }
}

/// Achievable rate of a link in bits/s.
pub fn link_rate<C>(c: &C, q_sq: f64, phys: &LinkPhysics, quad: &QuadratureSpec) -> Result<Estimate>
where
    C: Constellation,
    C::Point: NoiseDomain,
{
    check_power(q_sq)?;
    phys.validate()?;
    let rule = C::Point::noise_rule(quad)?;
    Ok(link_rate_with(c, q_sq, phys, &rule))
}

pub fn rate_lifi(c: &OpticalConstellation, q1_sq: f64, phys: &LinkPhysics, quad: &QuadratureSpec) -> Result<Estimate> {
    link_rate(c, q1_sq, phys, quad)
}

pub fn rate_wifi(c: &RFConstellation, q2_sq: f64, phys: &LinkPhysics, quad: &QuadratureSpec) -> Result<Estimate> {
    link_rate(c, q2_sq, phys, quad)
}

fn check_power(q_sq: f64) -> Result<()> {
    if q_sq >= 0.0 && q_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("precoder power must be nonnegative, got {q_sq}")))
    }
}

/// `|x_k − x_m|²` row-major.
pub(crate) fn sq_dists<S: Symbol>(points: &[S]) -> Vec<f64> {
    points
        .iter()
        .flat_map(|xk| points.iter().map(move |xm| xk.diff(*xm).energy()))
        .collect()
}

/// `Σ_k p_k log2 Σ_m p_m exp(−t·d_km)` for row-major `d`.
pub(crate) fn log_pair_sum(probs: &[f64], d: &[f64], t: f64) -> f64 {
    let k = probs.len();
    let mut total = 0.0;
    for (i, pi) in probs.iter().enumerate().filter(|(_, p)| **p > 0.0) {
        let row = &d[i * k..(i + 1) * k];
        // the diagonal term p_i·1 is the largest, so no overflow is possible
        let s: f64 = probs.iter().zip(row).map(|(pm, dm)| pm * (-t * dm).exp()).sum();
        total += pi * s.log2();
    }
    total
}

/// Closed-form `(lower, upper)` bounds on a link rate in bits/s.
pub fn link_bounds<C: Constellation>(c: &C, q_sq: f64, phys: &LinkPhysics) -> (f64, f64) {
    let w = <C::Point as Symbol>::EXP_WEIGHT;
    let factor = <C::Point as Symbol>::SAMPLES_PER_HZ * phys.bandwidth;
    let rho = q_sq.max(0.0) * phys.unit_snr();
    let d = sq_dists(c.points());
    let lower = phys.bandwidth * (1.0 - 1.0 / LN_2) - factor * log_pair_sum(c.probs(), &d, w * rho / 2.0);
    let upper = -factor * log_pair_sum(c.probs(), &d, w * rho);
    (lower, upper.max(0.0))
}

pub fn bounds_lifi(c: &OpticalConstellation, q1_sq: f64, phys: &LinkPhysics) -> (f64, f64) {
    link_bounds(c, q1_sq, phys)
}

pub fn bounds_wifi(c: &RFConstellation, q2_sq: f64, phys: &LinkPhysics) -> (f64, f64) {
    link_bounds(c, q2_sq, phys)
}

/// Lower and upper bounds on the aggregate rate.
pub fn bounds_aggregate(
    c1: &OpticalConstellation,
    c2: &RFConstellation,
    q1_sq: f64,
    q2_sq: f64,
    phys1: &LinkPhysics,
    phys2: &LinkPhysics,
) -> (f64, f64) {
    let (l1, u1) = bounds_lifi(c1, q1_sq, phys1);
    let (l2, u2) = bounds_wifi(c2, q2_sq, phys2);
    (l1 + l2, u1 + u2)
}

/// Rates, bounds and SNRs of both links at a fixed allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub snr1: f64,
    pub snr2: f64,
    pub rate_lifi: f64,
    pub rate_wifi: f64,
    pub rate_total: f64,
    pub lower_total: f64,
    pub upper_total: f64,
    /// Standard error of `rate_total` (zero for deterministic rules).
    pub std_err: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RateReport {
    pub const CSV_HEADER: &'static str = "snr1,snr2,rate_lifi,rate_wifi,rate_total,lower,upper,std";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.snr1,
            self.snr2,
            self.rate_lifi,
            self.rate_wifi,
            self.rate_total,
            self.lower_total,
            self.upper_total,
            self.std_err
        )
    }
}

/// Aggregate rate of the two links; the inputs are independent so the
/// rates add.
pub fn rate_aggregate(
    c1: &OpticalConstellation,
    c2: &RFConstellation,
    q1_sq: f64,
    q2_sq: f64,
    phys1: &LinkPhysics,
    phys2: &LinkPhysics,
    quad: &QuadratureSpec,
) -> Result<RateReport> {
    let r1 = rate_lifi(c1, q1_sq, phys1, quad)?;
    let r2 = rate_wifi(c2, q2_sq, phys2, quad)?;
    let (lower_total, upper_total) = bounds_aggregate(c1, c2, q1_sq, q2_sq, phys1, phys2);
    Ok(RateReport {
        snr1: phys1.snr(q1_sq, c1.elec_power()),
        snr2: phys2.snr(q2_sq, c2.elec_power()),
        rate_lifi: r1.value,
        rate_wifi: r2.value,
        rate_total: r1.value + r2.value,
        lower_total,
        upper_total,
        std_err: r1.std_err.hypot(r2.std_err),
        warnings: quad.warning().into_iter().collect(),
    })
}

/// Mutual information per channel use in nats for the unit-power input
/// `x/√ε` observed as `√snr·x/√ε + n`.
pub fn info_nats_at_snr<C>(c: &C, snr: f64, rule: &NoiseRule<C::Point>) -> Estimate
where
    C: Constellation,
    C::Point: NoiseDomain,
{
    let eps = c.elec_power();
    if c.order() < 2 || eps <= 0.0 || snr <= 0.0 {
        return Estimate::default();
    }
    let kernel = Kernel::new(c.points(), c.probs(), (snr / eps).sqrt());
    let e = rule.expect(|n| kernel.neg_info_at(n));
    Estimate {
        value: (-e.value).max(0.0),
        std_err: e.std_err,
    }
}

/// MMSE of estimating the unit-power input `x/√ε` from `√snr·x/√ε + n`.
///
/// With this normalization the derivative of the per-use mutual
/// information (nats) with respect to `snr` is `mmse/2` for real inputs
/// and `mmse` for complex inputs.
pub fn mmse<C>(c: &C, snr: f64, quad: &QuadratureSpec) -> Result<Estimate>
where
    C: Constellation,
    C::Point: NoiseDomain,
{
    if !(snr >= 0.0) {
        return Err(Error::Domain(format!("snr must be nonnegative, got {snr}")));
    }
    let eps = c.elec_power();
    if eps <= 0.0 {
        return Ok(Estimate::default());
    }
    let rule = C::Point::noise_rule(quad)?;
    if snr == 0.0 {
        // the estimate is the prior mean
        let mean = c
            .points()
            .iter()
            .zip(c.probs())
            .fold(<C::Point as Symbol>::zero(), |acc, (x, p)| acc + x.scaled(*p));
        return Ok(Estimate {
            value: (eps - mean.energy()) / eps,
            std_err: 0.0,
        });
    }
    let kernel = Kernel::new(c.points(), c.probs(), (snr / eps).sqrt());
    let probs = c.probs();
    let e = rule.expect(|n| {
        (0..c.order())
            .filter(|&k| probs[k] > 0.0)
            .map(|k| probs[k] * kernel.estimate_error_at(k, n))
            .sum::<f64>()
    });
    // errors were accumulated in δ units, i.e. scaled by √(snr/ε)·√ε = √snr
    Ok(Estimate {
        value: e.value / snr,
        std_err: e.std_err / snr,
    })
}

/// Scaled linear MMSE `t/(1 + t·x)`.
pub fn lmmse(t: f64, x: f64) -> f64 {
    t / (1.0 + t * x)
}

/// Inverse of [`lmmse`] in its second argument: `1/y − 1/t`.
pub fn lmmse_inv(t: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("lmmse parameter must be positive, got {t}")));
    }
    if !(y > 0.0) || y > t {
        return Err(Error::Domain(format!("lmmse inverse needs 0 < y ≤ {t}, got {y}")));
    }
    Ok(1.0 / y - 1.0 / t)
}
