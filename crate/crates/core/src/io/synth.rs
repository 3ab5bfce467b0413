//! Synthetic capacity traces drawn from per-user capacity statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::io::trace::{CapacitySeries, CapacityTrace};

/// Capacity statistics in force from `from_s` until the next phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPhase {
    #[serde(default)]
    pub from_s: f64,
    pub mean_mbps: f64,
    #[serde(default)]
    pub std_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityStats {
    pub user: String,
    /// Ascending `from_s`, the first at 0.
    pub phases: Vec<CapacityPhase>,
}

impl CapacityStats {
    pub fn stationary(user: impl Into<String>, mean_mbps: f64, std_mbps: f64) -> Self {
        CapacityStats {
            user: user.into(),
            phases: vec![CapacityPhase {
                from_s: 0.0,
                mean_mbps,
                std_mbps,
            }],
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::Config(format!("user {}: {m}", self.user)));
        match self.phases.first() {
            None => return bad("no capacity phases".into()),
            Some(p) if p.from_s != 0.0 => return bad("first capacity phase must start at 0".into()),
            _ => {}
        }
        if self.phases.windows(2).any(|w| !(w[1].from_s > w[0].from_s)) {
            return bad("capacity phases must have increasing from_s".into());
        }
        for p in &self.phases {
            if !(p.mean_mbps > 0.0 && p.mean_mbps.is_finite() && p.std_mbps >= 0.0 && p.std_mbps.is_finite()) {
                return bad(format!("need mean > 0 and std >= 0 (got {}, {})", p.mean_mbps, p.std_mbps));
            }
        }
        Ok(())
    }

    fn phase_at(&self, t: f64) -> &CapacityPhase {
        let i = self.phases.partition_point(|p| p.from_s <= t);
        &self.phases[i.saturating_sub(1)]
    }
}

/// One capacity level per `step_s` over `[0, horizon_s)`, each drawn from a
/// normal truncated at zero (rejection sampling keeps draws strictly
/// positive). Phase boundaries also start a new step. User `i` draws from
/// ChaCha stream `i` of `seed`, so a user's trace does not depend on who
/// else is listed after it. Repeated levels are merged, so zero-std phases
/// give one breakpoint each.
pub fn generate_synthetic_traces(
    stats: &[CapacityStats],
    horizon_s: f64,
    step_s: f64,
    seed: u64,
) -> Result<CapacityTrace, IoError> {
    if !(step_s > 0.0) || !(horizon_s > 0.0) {
        return Err(IoError::Config(format!(
            "horizon_s and step_s must be positive (got {horizon_s}, {step_s})"
        )));
    }
    let steps = (horizon_s / step_s).ceil() as usize;
    let mut trace = CapacityTrace::default();
    for (i, s) in stats.iter().enumerate() {
        s.validate()?;
        let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * step_s).collect();
        times.extend(s.phases.iter().map(|p| p.from_s).filter(|t| *t < horizon_s));
        times.sort_by(f64::total_cmp);
        times.dedup();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut points: Vec<(f64, f64)> = Vec::with_capacity(times.len());
        for t in times {
            let phase = s.phase_at(t);
            let c = if phase.std_mbps == 0.0 {
                phase.mean_mbps
            } else {
                let normal = Normal::new(phase.mean_mbps, phase.std_mbps).expect("valid normal");
                loop {
                    let x = normal.sample(&mut rng);
                    if x > 0.0 {
                        break x;
                    }
                }
            };
            if points.last().is_none_or(|p| p.1 != c) {
                points.push((t, c));
            }
        }
        let series = CapacitySeries::new(points).expect("generated series is valid");
        trace.insert(s.user.clone(), series);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: f64, std: f64) -> Vec<CapacityStats> {
        vec![CapacityStats::stationary("A", mean, std)]
    }

    #[test]
    fn zero_std_is_constant() {
        let t = generate_synthetic_traces(&stats(2.5, 0.0), 100.0, 1.0, 1).unwrap();
        assert_eq!(t.get("A").unwrap().breakpoints(), &[(0.0, 2.5)]);
    }

    #[test]
    fn seeded() {
        let a = generate_synthetic_traces(&stats(1.0, 0.5), 50.0, 1.0, 9).unwrap();
        let b = generate_synthetic_traces(&stats(1.0, 0.5), 50.0, 1.0, 9).unwrap();
        let c = generate_synthetic_traces(&stats(1.0, 0.5), 50.0, 1.0, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_within_bound() {
        // Truncated-normal mean: mu + sigma * pdf(a) / (1 - cdf(a)), a = -mu/sigma = -3.
        let pdf = (-4.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let tail = 0.001_349_898_031_630_094_5;
        let expected = 3.0 + pdf / (1.0 - tail);
        let tol = 3.0 * 1.0 / 1000f64.sqrt();
        let t = generate_synthetic_traces(&stats(3.0, 1.0), 1000.0, 1.0, 2024).unwrap();
        let pts = t.get("A").unwrap().breakpoints();
        assert_eq!(pts.len(), 1000);
        let mean = pts.iter().map(|p| p.1).sum::<f64>() / 1000.0;
        assert!((mean - expected).abs() < tol, "mean {mean}, expected {expected} ± {tol}");
        assert!(pts.iter().all(|p| p.1 > 0.0));
    }

    #[test]
    fn phases() {
        let s = CapacityStats {
            user: "B".into(),
            phases: vec![
                CapacityPhase { from_s: 0.0, mean_mbps: 0.3, std_mbps: 0.0 },
                CapacityPhase { from_s: 100.0, mean_mbps: 3.0, std_mbps: 0.0 },
            ],
        };
        let t = generate_synthetic_traces(&[s], 400.0, 1.0, 3).unwrap();
        assert_eq!(t.get("B").unwrap().breakpoints(), &[(0.0, 0.3), (100.0, 3.0)]);
    }

    #[test]
    fn rejects_bad_stats() {
        assert!(generate_synthetic_traces(&stats(0.0, 1.0), 10.0, 1.0, 0).is_err());
        assert!(generate_synthetic_traces(&stats(1.0, -1.0), 10.0, 1.0, 0).is_err());
    }
}
