//! Scenario files: one JSON document describing both links, the budget and
//! the solver settings.
//!
//! Noise densities are given either directly in the link's units per Hz
//! (`{"per_hz": 1e-21}`) or in dBm/MHz (`{"dbm_per_mhz": -57}`), which is
//! converted as `σ² = 10^(x/10) · 1e-3 / 1e6` W/Hz. A link gain may be
//! given explicitly; otherwise it is computed from the geometry block.
//!
//! Every field is written out on serialization, so load, save and load
//! again gives the same scenario.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::alternate::{AlternatingConfig, Problem};
use crate::channel::{lifi_gain, sample_fading, wifi_gain, FadingSample, LiFiGeometry, WiFiGeometry};
use crate::constellation::{make_pam, make_qam, Constellation, OpticalConstellation, RFConstellation};
use crate::error::{Error, Result};
use crate::power::{PowerAllocation, PowerBudget};
use crate::rate::LinkPhysics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    PerHz(f64),
    DbmPerMhz(f64),
}

impl NoiseSpec {
    pub fn per_hz(&self) -> f64 {
        match *self {
            NoiseSpec::PerHz(v) => v,
            NoiseSpec::DbmPerMhz(db) => 10f64.powf(db / 10.0) * 1e-3 / 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OpticalSpec {
    Pam {
        order: usize,
        peak: f64,
        mean_cap: f64,
        elec_cap: f64,
    },
    Explicit(ExplicitOptical),
}

/// Optical alphabet as `(point, probability)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitOptical {
    pub symbols: Vec<(f64, f64)>,
    pub peak: f64,
    pub mean_cap: f64,
    pub elec_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RfSpec {
    Qam { order: usize, elec_cap: f64 },
    Explicit(ExplicitRf),
}

/// RF alphabet as `([re, im], probability)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRf {
    pub symbols: Vec<([f64; 2], f64)>,
    pub elec_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// Line-of-sight component only, no shadowing.
    Deterministic,
    /// One draw of scattering and shadowing from the scenario seed.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiFiLink {
    pub geometry: LiFiGeometry,
    /// Overrides the geometric gain when set.
    pub gain: Option<f64>,
    pub bandwidth: f64,
    pub noise: NoiseSpec,
    pub amp_efficiency: f64,
    pub constellation: OpticalSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WiFiLink {
    pub geometry: WiFiGeometry,
    pub fading: FadingMode,
    /// Overrides the gain magnitude when set.
    pub gain: Option<f64>,
    pub bandwidth: f64,
    pub noise: NoiseSpec,
    pub amp_efficiency: f64,
    pub constellation: RfSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub lifi: LiFiLink,
    pub wifi: WiFiLink,
    pub budget: PowerBudget,
    #[serde(default)]
    pub solver: AlternatingConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for Scenario {
    /// 8-PAM and 16-QAM over the reference geometries with unit budgets.
    fn default() -> Self {
        Scenario {
            lifi: LiFiLink {
                geometry: LiFiGeometry::reference(),
                gain: None,
                bandwidth: 40e6,
                noise: NoiseSpec::PerHz(1e-21),
                amp_efficiency: 1.0,
                constellation: OpticalSpec::Pam {
                    order: 8,
                    peak: 1.0,
                    mean_cap: 0.5,
                    elec_cap: 1.0,
                },
            },
            wifi: WiFiLink {
                geometry: WiFiGeometry::reference(),
                fading: FadingMode::Deterministic,
                gain: None,
                bandwidth: 20e6,
                noise: NoiseSpec::DbmPerMhz(-57.0),
                amp_efficiency: 1.0,
                constellation: RfSpec::Qam {
                    order: 16,
                    elec_cap: 1.0,
                },
            },
            budget: PowerBudget {
                total_elec: 1.0,
                max_avg_optical: 0.8,
                max_inst_optical: 1.0,
                budget_uses_caps: false,
            },
            solver: AlternatingConfig::default(),
            seed: 0,
        }
    }
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        // cap violations keep their own kind so callers can tell them apart
        Error::InfeasibleCaps(_) | Error::InfeasibleSet(_) => e,
        other => Error::config(path, other.to_string()),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." { "scenario".into() } else { path },
                e.inner().to_string(),
            )
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks every block; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.lifi.geometry.validate().map_err(|e| at("lifi.geometry", e))?;
        if let Some(g) = self.lifi.gain {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config("lifi.gain", format!("must be nonnegative, got {g}")));
            }
        }
        positive("lifi.bandwidth", self.lifi.bandwidth)?;
        positive("lifi.noise", self.lifi.noise.per_hz())?;
        positive("lifi.amp_efficiency", self.lifi.amp_efficiency)?;

        self.wifi.geometry.validate().map_err(|e| at("wifi.geometry", e))?;
        if let Some(g) = self.wifi.gain {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config("wifi.gain", format!("must be nonnegative, got {g}")));
            }
        }
        positive("wifi.bandwidth", self.wifi.bandwidth)?;
        positive("wifi.noise", self.wifi.noise.per_hz())?;
        positive("wifi.amp_efficiency", self.wifi.amp_efficiency)?;

        self.budget.validate().map_err(|e| at("budget", e))?;
        self.solver.validate().map_err(|e| at("solver", e))?;
        self.lifi_constellation()?;
        self.wifi_constellation()?;
        Ok(())
    }

    pub fn lifi_constellation(&self) -> Result<OpticalConstellation> {
        let c = match &self.lifi.constellation {
            OpticalSpec::Pam {
                order,
                peak,
                mean_cap,
                elec_cap,
            } => make_pam(*order, *peak, *mean_cap, *elec_cap),
            OpticalSpec::Explicit(e) => OpticalConstellation::new(
                e.symbols.iter().map(|s| s.0).collect(),
                e.symbols.iter().map(|s| s.1).collect(),
                e.peak,
                e.mean_cap,
                e.elec_cap,
            ),
        }
        .map_err(|e| at("lifi.constellation", e))?;
        c.feasible_set().map_err(|e| at("lifi.constellation", e))?;
        Ok(c)
    }

    pub fn wifi_constellation(&self) -> Result<RFConstellation> {
        let c = match &self.wifi.constellation {
            RfSpec::Qam { order, elec_cap } => make_qam(*order, *elec_cap),
            RfSpec::Explicit(e) => RFConstellation::new(
                e.symbols.iter().map(|s| Complex64::new(s.0[0], s.0[1])).collect(),
                e.symbols.iter().map(|s| s.1).collect(),
                e.elec_cap,
            ),
        }
        .map_err(|e| at("wifi.constellation", e))?;
        c.feasible_set().map_err(|e| at("wifi.constellation", e))?;
        Ok(c)
    }

    pub fn lifi_physics(&self) -> Result<LinkPhysics> {
        let gain = match self.lifi.gain {
            Some(g) => g,
            None => lifi_gain(&self.lifi.geometry).map_err(|e| at("lifi.geometry", e))?,
        };
        LinkPhysics::new(
            gain,
            self.lifi.bandwidth,
            self.lifi.noise.per_hz(),
            self.lifi.amp_efficiency,
        )
        .map_err(|e| at("lifi", e))
    }

    pub fn wifi_physics(&self) -> Result<LinkPhysics> {
        let gain = match self.wifi.gain {
            Some(g) => g,
            None => {
                let fading = match self.wifi.fading {
                    FadingMode::Deterministic => FadingSample::deterministic(),
                    FadingMode::Sampled => sample_fading(self.seed, &self.wifi.geometry),
                };
                wifi_gain(&self.wifi.geometry, &fading)
                    .map_err(|e| at("wifi.geometry", e))?
                    .norm()
            }
        };
        LinkPhysics::new(
            gain,
            self.wifi.bandwidth,
            self.wifi.noise.per_hz(),
            self.wifi.amp_efficiency,
        )
        .map_err(|e| at("wifi", e))
    }

    /// Numeric instance with the starting (usually equiprobable) distributions.
    pub fn problem(&self) -> Result<Problem> {
        Ok(Problem {
            lifi: self.lifi_constellation()?,
            wifi: self.wifi_constellation()?,
            phys1: self.lifi_physics()?,
            phys2: self.wifi_physics()?,
            budget: self.budget,
        })
    }
}

/// Half of the budget to each link, with the optical share cut at `τ²`.
pub fn equal_split(prob: &Problem) -> PowerAllocation {
    let (k1, k2) = prob.kappa();
    let half = 0.5 * prob.budget.total_elec;
    let q1 = if k1 > 0.0 { half / k1 } else { 0.0 };
    let q2 = if k2 > 0.0 { half / k2 } else { 0.0 };
    PowerAllocation::fixed(q1.min(prob.budget.tau_sq(&prob.lifi)), q2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_round_trips() {
        let s = Scenario::default();
        let text = s.to_json();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn reference_link_numbers() {
        let p = Scenario::default().problem().unwrap();
        assert_relative_eq!(p.phys2.noise_psd, 10f64.powf(-5.7) * 1e-9, max_relative = 1e-12);
        assert_relative_eq!(p.phys1.noise_psd, 1e-21);
        assert!(p.phys1.gain > 0.0 && p.phys2.gain > 0.0);
    }

    #[test]
    fn noise_conversion() {
        assert_relative_eq!(NoiseSpec::DbmPerMhz(-30.0).per_hz(), 1e-12, max_relative = 1e-12);
        assert_relative_eq!(NoiseSpec::DbmPerMhz(0.0).per_hz(), 1e-9, max_relative = 1e-12);
    }

    #[test]
    fn errors_name_the_field() {
        let mut v = serde_json::to_value(Scenario::default()).unwrap();
        v["lifi"]["bandwidth"] = serde_json::json!(-1.0);
        match Scenario::from_json(&v.to_string()).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "lifi.bandwidth"),
            e => panic!("unexpected {e:?}"),
        }

        let mut v = serde_json::to_value(Scenario::default()).unwrap();
        v["wifi"]["constellation"] = serde_json::json!({"qam": {"order": "x", "elec_cap": 1.0}});
        match Scenario::from_json(&v.to_string()).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "wifi.constellation.qam.order"),
            e => panic!("unexpected {e:?}"),
        }

        let mut v = serde_json::to_value(Scenario::default()).unwrap();
        v["budget"]["bogus"] = serde_json::json!(1);
        assert!(matches!(Scenario::from_json(&v.to_string()), Err(Error::Config { .. })));
    }

    #[test]
    fn unsupported_order_is_a_config_error() {
        let mut s = Scenario::default();
        s.wifi.constellation = RfSpec::Qam {
            order: 8,
            elec_cap: 1.0,
        };
        match s.validate().unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "wifi.constellation"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn violated_caps_keep_their_kind() {
        let mut s = Scenario::default();
        let explicit = |mean_cap| {
            OpticalSpec::Explicit(ExplicitOptical {
                symbols: vec![(0.0, 0.5), (1.0, 0.5)],
                peak: 1.0,
                mean_cap,
                elec_cap: 1.0,
            })
        };
        s.lifi.constellation = explicit(0.5);
        s.validate().unwrap();
        // equiprobable {0, 1} has mean 0.5, so a 0.2 mean cap cannot hold
        s.lifi.constellation = explicit(0.2);
        assert!(matches!(
            Scenario::from_json(&s.to_json()),
            Err(Error::InfeasibleCaps(_))
        ));
    }

    #[test]
    fn equal_split_spends_the_budget() {
        let s = Scenario::default();
        let p = s.problem().unwrap();
        let a = equal_split(&p);
        let k = p.kappa();
        assert!(a.q1_sq <= p.budget.tau_sq(&p.lifi) + 1e-15);
        assert_relative_eq!(a.q2_sq * k.1, 0.5 * s.budget.total_elec, max_relative = 1e-12);
    }
}
