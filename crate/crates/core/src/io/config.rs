//! TOML experiment configuration.
//!
//! Top-level keys mirror [`SimConfig`]; `[defaults]` holds the user
//! parameters every `[[users]]` entry inherits unless it overrides them.
//! Capacity statistics for synthetic traces live on each user as
//! `capacity = [{ from_s, mean_mbps, std_mbps }, ...]`.
//!
//! ```toml
//! mechanism = "momd"
//! K = 2
//! video_length_s = 100.0
//!
//! [defaults]
//! theta = 1.0
//! cost_per_mbit = 0.05
//!
//! [[users]]
//! name = "A"
//! capacity = [{ mean_mbps = 3.0, std_mbps = 0.5 }]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Mechanism, SimConfig, SimUser};
use crate::error::IoError;
use crate::io::synth::{CapacityPhase, CapacityStats};
use crate::io::trace::EncounterTrace;
use crate::model::{BitrateLadder, UserId, UserProfile};
use crate::strategy::{AdaptationPolicy, ParticipationConfig};

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn video() -> f64 {
    100.0
}
fn retry() -> f64 {
    1.0
}
fn max_time() -> f64 {
    100_000.0
}
fn mech() -> Mechanism {
    Mechanism::Momd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "mech")]
    pub mechanism: Mechanism,
    #[serde(default = "one", rename = "K")]
    pub segments_per_auction: usize,
    #[serde(default = "video")]
    pub video_length_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub overhead_energy_per_auction: f64,
    #[serde(default)]
    pub overhead_time_per_auction_s: f64,
    #[serde(default)]
    pub d2d_delay_s: f64,
    #[serde(default)]
    pub rebuffer_penalty_per_s: f64,
    #[serde(default = "retry")]
    pub idle_retry_s: f64,
    #[serde(default = "max_time")]
    pub max_time_s: f64,
    #[serde(default = "yes")]
    pub record_events: bool,
    #[serde(default)]
    pub adaptation: AdaptationPolicy,
    #[serde(default)]
    pub participation: ParticipationSection,
    #[serde(default)]
    pub defaults: UserDefaults,
    #[serde(default)]
    pub traces: TraceSection,
    #[serde(default)]
    pub users: Vec<UserEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipationSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "alpha_buf")]
    pub alpha_buf: f64,
    #[serde(default = "alpha_link")]
    pub alpha_link: f64,
}

fn alpha_buf() -> f64 {
    ParticipationConfig::default().alpha_buf
}
fn alpha_link() -> f64 {
    ParticipationConfig::default().alpha_link
}

impl Default for ParticipationSection {
    fn default() -> Self {
        ParticipationSection {
            enabled: false,
            alpha_buf: alpha_buf(),
            alpha_link: alpha_link(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserDefaults {
    pub rates: Vec<f64>,
    pub segment_length_s: f64,
    pub max_buffer_s: f64,
    pub theta: f64,
    pub cost_per_mbit: f64,
    pub cost_per_download_s: f64,
    pub buffer_gain_scale: f64,
    pub buffer_gain_decay: f64,
    pub degradation_slope: f64,
}

impl Default for UserDefaults {
    fn default() -> Self {
        UserDefaults {
            rates: vec![0.2, 0.4, 0.7, 1.3, 2.3],
            segment_length_s: 10.0,
            max_buffer_s: 40.0,
            theta: 1.0,
            cost_per_mbit: 0.0,
            cost_per_download_s: 0.0,
            buffer_gain_scale: 0.0,
            buffer_gain_decay: 0.5,
            degradation_slope: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncounterMode {
    /// Everyone meets everyone from t = 0.
    All,
    /// Nobody meets anybody but themselves.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    pub horizon_s: f64,
    pub step_s: f64,
    /// Used when no encounter trace file is supplied.
    pub encounters: EncounterMode,
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection {
            horizon_s: 1000.0,
            step_s: 1.0,
            encounters: EncounterMode::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub name: String,
    #[serde(default = "yes")]
    pub watching: bool,
    #[serde(default)]
    pub helper: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capacity: Vec<CapacityPhase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_length_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_buffer_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_per_mbit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_per_download_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer_gain_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer_gain_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degradation_slope: Option<f64>,
}

impl UserEntry {
    pub fn new(name: impl Into<String>) -> Self {
        UserEntry {
            name: name.into(),
            watching: true,
            helper: false,
            capacity: Vec::new(),
            rates: None,
            segment_length_s: None,
            max_buffer_s: None,
            theta: None,
            cost_per_mbit: None,
            cost_per_download_s: None,
            buffer_gain_scale: None,
            buffer_gain_decay: None,
            degradation_slope: None,
        }
    }

    fn with_defaults(&self, d: &UserDefaults) -> UserEntry {
        UserEntry {
            rates: Some(self.rates.clone().unwrap_or_else(|| d.rates.clone())),
            segment_length_s: Some(self.segment_length_s.unwrap_or(d.segment_length_s)),
            max_buffer_s: Some(self.max_buffer_s.unwrap_or(d.max_buffer_s)),
            theta: Some(self.theta.unwrap_or(d.theta)),
            cost_per_mbit: Some(self.cost_per_mbit.unwrap_or(d.cost_per_mbit)),
            cost_per_download_s: Some(self.cost_per_download_s.unwrap_or(d.cost_per_download_s)),
            buffer_gain_scale: Some(self.buffer_gain_scale.unwrap_or(d.buffer_gain_scale)),
            buffer_gain_decay: Some(self.buffer_gain_decay.unwrap_or(d.buffer_gain_decay)),
            degradation_slope: Some(self.degradation_slope.unwrap_or(d.degradation_slope)),
            ..self.clone()
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// The same configuration with every user parameter written out.
    pub fn effective(&self) -> ConfigFile {
        ConfigFile {
            users: self.users.iter().map(|u| u.with_defaults(&self.defaults)).collect(),
            ..self.clone()
        }
    }

    pub fn user_names(&self) -> Vec<String> {
        self.users.iter().map(|u| u.name.clone()).collect()
    }

    pub fn profiles(&self) -> Result<Vec<UserProfile>, IoError> {
        self.users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let u = u.with_defaults(&self.defaults);
                let ladder = BitrateLadder::new(
                    u.rates.expect("filled"),
                    u.segment_length_s.expect("filled"),
                    u.max_buffer_s.expect("filled"),
                )?;
                let profile = UserProfile {
                    id: UserId(i as u32),
                    name: u.name.clone(),
                    ladder,
                    theta: u.theta.expect("filled"),
                    cost_per_mbit: u.cost_per_mbit.expect("filled"),
                    cost_per_download_s: u.cost_per_download_s.expect("filled"),
                    buffer_gain_scale: u.buffer_gain_scale.expect("filled"),
                    buffer_gain_decay: u.buffer_gain_decay.expect("filled"),
                    degradation_slope: u.degradation_slope.expect("filled"),
                };
                profile
                    .validate()
                    .map_err(|e| IoError::Config(format!("user {}: {e}", u.name)))?;
                Ok(profile)
            })
            .collect()
    }

    pub fn to_sim_config(&self) -> Result<SimConfig, IoError> {
        let users = self
            .profiles()?
            .into_iter()
            .zip(&self.users)
            .map(|(profile, u)| SimUser {
                profile,
                watching: u.watching,
                helper: u.helper,
            })
            .collect();
        let sim = SimConfig {
            users,
            segments_per_auction: self.segments_per_auction,
            mechanism: self.mechanism,
            adaptation: self.adaptation.clone(),
            participation: ParticipationConfig {
                alpha_buf: self.participation.alpha_buf,
                alpha_link: self.participation.alpha_link,
            },
            participation_enabled: self.participation.enabled,
            video_length_s: self.video_length_s,
            overhead_energy_per_auction: self.overhead_energy_per_auction,
            overhead_time_per_auction_s: self.overhead_time_per_auction_s,
            d2d_delay_s: self.d2d_delay_s,
            rebuffer_penalty_per_s: self.rebuffer_penalty_per_s,
            idle_retry_s: self.idle_retry_s,
            max_time_s: self.max_time_s,
            seed: self.seed,
            record_events: self.record_events,
        };
        sim.validate().map_err(|e| IoError::Config(e.to_string()))?;
        Ok(sim)
    }

    /// Capacity statistics for synthetic traces; every user needs them.
    pub fn capacity_stats(&self) -> Result<Vec<CapacityStats>, IoError> {
        self.users
            .iter()
            .map(|u| {
                if u.capacity.is_empty() {
                    return Err(IoError::Config(format!(
                        "user {} has no capacity statistics; supply a trace file",
                        u.name
                    )));
                }
                let stats = CapacityStats {
                    user: u.name.clone(),
                    phases: u.capacity.clone(),
                };
                stats.validate()?;
                Ok(stats)
            })
            .collect()
    }

    pub fn default_encounters(&self) -> EncounterTrace {
        match self.traces.encounters {
            EncounterMode::All => EncounterTrace::fully_connected(&self.user_names()),
            EncounterMode::None => EncounterTrace::default(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ConfigFile, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ConfigFile::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
mechanism = "somd"
video_length_s = 60.0

[defaults]
theta = 2.0
cost_per_mbit = 0.1

[participation]
enabled = true

[[users]]
name = "A"
capacity = [{ mean_mbps = 3.0, std_mbps = 0.5 }]

[[users]]
name = "B"
theta = 0.5
watching = false
capacity = [{ mean_mbps = 0.3 }, { from_s = 100.0, mean_mbps = 3.0 }]
"#;

    #[test]
    fn parse_and_resolve() {
        let cfg = ConfigFile::parse(SAMPLE).unwrap();
        let sim = cfg.to_sim_config().unwrap();
        assert_eq!(sim.mechanism, Mechanism::Somd);
        assert_eq!(sim.segments_per_auction, 1);
        assert!(sim.participation_enabled);
        assert_eq!(sim.participation.alpha_link, 0.5);
        assert_eq!(sim.users[0].profile.theta, 2.0);
        assert_eq!(sim.users[1].profile.theta, 0.5);
        assert_eq!(sim.users[1].profile.id, UserId(1));
        assert!(!sim.users[1].watching);
        assert_eq!(cfg.capacity_stats().unwrap()[1].phases[1].from_s, 100.0);
    }

    #[test]
    fn effective_round_trip() {
        let cfg = ConfigFile::parse(SAMPLE).unwrap();
        let eff = cfg.effective();
        let again = ConfigFile::parse(&eff.to_toml()).unwrap();
        assert_eq!(again, eff);
        assert_eq!(again.to_sim_config().unwrap(), cfg.to_sim_config().unwrap());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(ConfigFile::parse("bogus = 1").is_err());
        let bad = ConfigFile::parse("[[users]]\nname = \"A\"\nbuffer_gain_decay = 1.5").unwrap();
        assert!(bad.to_sim_config().is_err());
        let odd = ConfigFile::parse("video_length_s = 15.0").unwrap();
        let mut odd = odd;
        odd.users.push(UserEntry::new("A"));
        assert!(odd.to_sim_config().is_err());
        let k = ConfigFile::parse("mechanism = \"somd\"\nK = 2").unwrap();
        assert!(k.to_sim_config().is_err());
    }

    #[test]
    fn empty_user_list_is_fine() {
        let cfg = ConfigFile::parse("").unwrap();
        assert!(cfg.to_sim_config().unwrap().users.is_empty());
    }
}
