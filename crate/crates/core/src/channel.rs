//! Channel gains of the optical and RF links.
//!
//! The optical gain follows the line-of-sight Lambertian model with an
//! optical filter and a concentrator that is cut off outside the receiver
//! field of view. The RF gain combines free-space loss at the carrier
//! frequency, an extra 35 dB/decade slope beyond the breakpoint distance,
//! log-normal shadowing and Ricean small-scale fading.
//!
//! Everything here is a pure function of its inputs. Randomness enters only
//! through [`sample_fading`], which derives every draw from an explicit seed.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry and optics of the optical link. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiFiGeometry {
    pub half_power_angle: f64,
    /// Detector area in m².
    pub detector_area: f64,
    /// LED to photodiode distance in m.
    pub distance: f64,
    pub radiance_angle: f64,
    pub incidence_angle: f64,
    #[serde(default = "default_filter_gain")]
    pub filter_gain: f64,
    #[serde(default = "default_refractive_index")]
    pub refractive_index: f64,
    /// Receiver field of view.
    pub fov: f64,
    /// LED drive current I_H in A. Kept for completeness; no rate
    /// expression depends on it.
    #[serde(default = "default_drive_current")]
    pub drive_current: f64,
}

fn default_filter_gain() -> f64 {
    1.0
}

fn default_refractive_index() -> f64 {
    1.5
}

fn default_drive_current() -> f64 {
    8.0
}

impl LiFiGeometry {
    /// LED at (0, 0, 5.7) m straight above a photodiode at (0, 0, 1.7) m,
    /// 60° half-power angle, 1 cm² detector, 90° field of view.
    pub fn reference() -> Self {
        LiFiGeometry {
            half_power_angle: 60.0,
            detector_area: 1e-4,
            distance: 4.0,
            radiance_angle: 0.0,
            incidence_angle: 0.0,
            filter_gain: default_filter_gain(),
            refractive_index: default_refractive_index(),
            fov: 90.0,
            drive_current: default_drive_current(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) {
            return Err(Error::Domain(format!("distance must be > 0, got {}", self.distance)));
        }
        if !(self.detector_area > 0.0) {
            return Err(Error::Domain(format!(
                "detector_area must be > 0, got {}",
                self.detector_area
            )));
        }
        if !(self.half_power_angle > 0.0 && self.half_power_angle < 90.0) {
            return Err(Error::Domain(format!(
                "half_power_angle must lie in (0, 90), got {}",
                self.half_power_angle
            )));
        }
        if !(self.fov > 0.0 && self.fov <= 90.0) {
            return Err(Error::Domain(format!("fov must lie in (0, 90], got {}", self.fov)));
        }
        if !(self.refractive_index >= 1.0) {
            return Err(Error::Domain(format!(
                "refractive_index must be >= 1, got {}",
                self.refractive_index
            )));
        }
        if !(self.filter_gain >= 0.0) {
            return Err(Error::Domain(format!(
                "filter_gain must be >= 0, got {}",
                self.filter_gain
            )));
        }
        Ok(())
    }
}

/// Geometry and propagation parameters of the RF link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WiFiGeometry {
    /// Access point to user distance in m.
    pub distance: f64,
    pub breakpoint_distance: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    #[serde(default = "default_ricean_k")]
    pub ricean_k: f64,
    /// Angle of arrival/departure in degrees.
    pub aoa: f64,
    /// Shadowing standard deviation (dB) within the breakpoint distance.
    #[serde(default = "default_shadow_near")]
    pub shadow_std_near: f64,
    /// Shadowing standard deviation (dB) beyond the breakpoint distance.
    #[serde(default = "default_shadow_far")]
    pub shadow_std_far: f64,
}

fn default_ricean_k() -> f64 {
    1.0
}

fn default_shadow_near() -> f64 {
    3.0
}

fn default_shadow_far() -> f64 {
    5.0
}

impl WiFiGeometry {
    /// 4 m link at 2.4 GHz with a 5 m breakpoint and 45° angle of arrival.
    pub fn reference() -> Self {
        WiFiGeometry {
            distance: 4.0,
            breakpoint_distance: 5.0,
            carrier_freq: 2.4e9,
            ricean_k: default_ricean_k(),
            aoa: 45.0,
            shadow_std_near: default_shadow_near(),
            shadow_std_far: default_shadow_far(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) {
            return Err(Error::Domain(format!("distance must be > 0, got {}", self.distance)));
        }
        if !(self.breakpoint_distance > 0.0) {
            return Err(Error::Domain(format!(
                "breakpoint_distance must be > 0, got {}",
                self.breakpoint_distance
            )));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(Error::Domain(format!(
                "carrier_freq must be > 0, got {}",
                self.carrier_freq
            )));
        }
        if !(self.ricean_k >= 0.0) {
            return Err(Error::Domain(format!("ricean_k must be >= 0, got {}", self.ricean_k)));
        }
        if !(self.shadow_std_near >= 0.0 && self.shadow_std_far >= 0.0) {
            return Err(Error::Domain("shadowing standard deviations must be >= 0".into()));
        }
        Ok(())
    }

    /// Shadowing spread that applies at this distance.
    pub fn shadow_std(&self) -> f64 {
        if self.distance <= self.breakpoint_distance {
            self.shadow_std_near
        } else {
            self.shadow_std_far
        }
    }
}

/// One realization of the random part of the RF channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingSample {
    /// Unit-variance circular Gaussian scatter component.
    pub scatter: Complex64,
    /// Shadowing loss in dB.
    pub shadow_db: f64,
}

impl FadingSample {
    /// The mean realization: no scatter and no shadowing.
    pub fn deterministic() -> Self {
        FadingSample {
            scatter: Complex64::new(0.0, 0.0),
            shadow_db: 0.0,
        }
    }
}

/// Lambertian emission order `m = -ln 2 / ln cos(θ½)`.
pub fn lambertian_order(half_power_angle_deg: f64) -> Result<f64> {
    if !(half_power_angle_deg > 0.0 && half_power_angle_deg < 90.0) {
        return Err(Error::Domain(format!(
            "half-power angle must lie in (0, 90) degrees, got {half_power_angle_deg}"
        )));
    }
    Ok(-std::f64::consts::LN_2 / half_power_angle_deg.to_radians().cos().ln())
}

/// Concentrator gain `n² / sin²(Ψc)` inside the field of view, zero outside.
pub fn concentrator_gain(incidence_deg: f64, refractive_index: f64, fov_deg: f64) -> f64 {
    if (0.0..=fov_deg).contains(&incidence_deg) {
        let s = fov_deg.to_radians().sin();
        refractive_index * refractive_index / (s * s)
    } else {
        0.0
    }
}

/// Line-of-sight optical channel gain `g1`.
pub fn lifi_gain(geom: &LiFiGeometry) -> Result<f64> {
    geom.validate()?;
    let m = lambertian_order(geom.half_power_angle)?;
    let gc = concentrator_gain(geom.incidence_angle, geom.refractive_index, geom.fov);
    if gc == 0.0 {
        return Ok(0.0);
    }
    let cos_rad = geom.radiance_angle.to_radians().cos().max(0.0);
    let cos_inc = geom.incidence_angle.to_radians().cos().max(0.0);
    let d2 = geom.distance * geom.distance;
    Ok((m + 1.0) * geom.detector_area / (2.0 * std::f64::consts::PI * d2)
        * cos_rad.powf(m)
        * cos_inc
        * geom.filter_gain
        * gc)
}

/// Free-space loss in dB: `20 log10 d + 20 log10 fc − 147.5`.
pub fn free_space_loss_db(distance: f64, carrier_freq: f64) -> f64 {
    20.0 * distance.log10() + 20.0 * carrier_freq.log10() - 147.5
}

/// Deterministic path loss of the RF link in dB, shadowing excluded.
pub fn wifi_path_loss(distance: f64, carrier_freq: f64, breakpoint: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("distance must be > 0, got {distance}")));
    }
    let mut loss = free_space_loss_db(distance, carrier_freq);
    if distance > breakpoint {
        loss += 35.0 * (distance / breakpoint).log10();
    }
    Ok(loss)
}

/// Ricean small-scale gain `√(K/(K+1)) e^{jψ} + √(1/(K+1)) a`.
///
/// `K = ∞` keeps only the line-of-sight term.
pub fn ricean_gain(ricean_k: f64, aoa_deg: f64, scatter: Complex64) -> Complex64 {
    let los = Complex64::from_polar(1.0, aoa_deg.to_radians());
    if ricean_k.is_infinite() {
        return los;
    }
    los * (ricean_k / (ricean_k + 1.0)).sqrt() + scatter * (1.0 / (ricean_k + 1.0)).sqrt()
}

/// Complex RF channel gain `g2` for one fading realization.
pub fn wifi_gain(geom: &WiFiGeometry, fading: &FadingSample) -> Result<Complex64> {
    geom.validate()?;
    let loss = wifi_path_loss(geom.distance, geom.carrier_freq, geom.breakpoint_distance)?;
    let gr = ricean_gain(geom.ricean_k, geom.aoa, fading.scatter);
    Ok(gr * 10f64.powf(-(loss + fading.shadow_db) / 20.0))
}

/// Draws the scatter term and the shadowing loss from `seed`.
pub fn sample_fading(seed: u64, geom: &WiFiGeometry) -> FadingSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_fading_with(&mut rng, geom)
}

pub(crate) fn sample_fading_with(rng: &mut ChaCha8Rng, geom: &WiFiGeometry) -> FadingSample {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    let shadow: f64 = StandardNormal.sample(rng);
    FadingSample {
        scatter: Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2,
        shadow_db: shadow * geom.shadow_std(),
    }
}

/// Draws `count` consecutive fading realizations from one seeded stream.
pub fn sample_fading_batch(seed: u64, geom: &WiFiGeometry, count: usize) -> Vec<FadingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_fading_with(&mut rng, geom)).collect()
}
