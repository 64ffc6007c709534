use crate::objective::Archive;
use serde::{Deserialize, Serialize};
use std::fmt;

/// No improvement larger than `delta` during the last `window` entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stagnation {
    pub window: usize,
    pub delta: f64,
}

/// Stack of stopping rules; the run stops as soon as any one fires. At
/// least one hard budget (evaluations, fidelity or wall time) is required.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Termination {
    pub max_evals: Option<usize>,
    /// Budget on the summed fidelity of all evaluations, failures included.
    pub max_fidelity: Option<f64>,
    /// Seconds.
    pub max_wall_time: Option<f64>,
    /// Stop once a score at or below this value is observed.
    pub target: Option<f64>,
    pub stagnation: Option<Stagnation>,
    /// Stop when the model-based tuner's largest expected improvement
    /// falls below this value.
    pub ei_threshold: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEvals,
    MaxFidelity,
    MaxWallTime,
    Target,
    Stagnation,
    EiThreshold,
    /// The tuner has nothing left to propose.
    Exhausted,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::MaxEvals => "max_evals",
            StopReason::MaxFidelity => "max_fidelity",
            StopReason::MaxWallTime => "max_wall_time",
            StopReason::Target => "target",
            StopReason::Stagnation => "stagnation",
            StopReason::EiThreshold => "ei_threshold",
            StopReason::Exhausted => "exhausted",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Termination {
    pub fn evals(n: usize) -> Self {
        Self { max_evals: Some(n), ..Self::default() }
    }

    pub fn has_hard_budget(&self) -> bool {
        self.max_evals.is_some() || self.max_fidelity.is_some() || self.max_wall_time.is_some()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.has_hard_budget() {
            return Err("termination needs max_evals, max_fidelity or max_wall_time".into());
        }
        if let Some(s) = self.stagnation {
            if s.window == 0 || !(s.delta >= 0.0) {
                return Err("stagnation needs window >= 1 and delta >= 0".into());
            }
        }
        Ok(())
    }

    /// First rule that fires, checked in declaration order.
    pub fn check(&self, archive: &Archive, elapsed_seconds: f64, max_ei: Option<f64>) -> Option<StopReason> {
        if self.max_evals.is_some_and(|m| archive.len() >= m) {
            return Some(StopReason::MaxEvals);
        }
        if self.max_fidelity.is_some_and(|m| archive.total_fidelity() >= m) {
            return Some(StopReason::MaxFidelity);
        }
        if self.max_wall_time.is_some_and(|m| elapsed_seconds >= m) {
            return Some(StopReason::MaxWallTime);
        }
        if let Some(t) = self.target {
            if archive.entries().iter().any(|e| !e.failed && e.score <= t) {
                return Some(StopReason::Target);
            }
        }
        if let Some(s) = self.stagnation {
            if since_improvement(archive, s.delta).is_some_and(|n| n >= s.window) {
                return Some(StopReason::Stagnation);
            }
        }
        if let (Some(eps), Some(ei)) = (self.ei_threshold, max_ei) {
            if ei < eps {
                return Some(StopReason::EiThreshold);
            }
        }
        None
    }

    /// Evaluations still allowed by `max_evals`.
    pub fn remaining_evals(&self, archive: &Archive) -> Option<usize> {
        self.max_evals.map(|m| m.saturating_sub(archive.len()))
    }

    pub fn remaining_fidelity(&self, archive: &Archive) -> Option<f64> {
        self.max_fidelity.map(|m| m - archive.total_fidelity())
    }
}

/// Entries after the last one that improved the best score by more than
/// `delta` (the first successful entry counts as an improvement).
fn since_improvement(archive: &Archive, delta: f64) -> Option<usize> {
    let mut best: Option<f64> = None;
    let mut last = None;
    for (pos, e) in archive.entries().iter().enumerate() {
        if e.failed {
            continue;
        }
        if best.is_none_or(|b| e.score < b - delta) {
            last = Some(pos);
        }
        best = Some(best.map_or(e.score, |b| b.min(e.score)));
    }
    last.map(|p| archive.len() - p - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Archive, Entry};
    use crate::space::Config;

    fn archive(scores: &[f64]) -> Archive {
        let mut a = Archive::new();
        for (i, &s) in scores.iter().enumerate() {
            a.push(Entry {
                index: i + 1,
                config: Config::new(),
                fidelity: 1.0,
                instances: vec![0],
                split_scores: vec![Some(s)],
                raw: Some(s),
                score: s,
                failed: false,
                error: None,
                proposer: "t".into(),
                batch: i,
                seconds: 0.0,
            })
            .unwrap();
        }
        a
    }

    #[test]
    fn max_evals_fires() {
        let t = Termination::evals(10);
        assert_eq!(t.check(&archive(&[1.0; 10]), 0.0, None), Some(StopReason::MaxEvals));
        assert_eq!(t.check(&archive(&[1.0; 9]), 0.0, None), None);
    }

    #[test]
    fn stagnation_after_window() {
        let t = Termination { stagnation: Some(Stagnation { window: 5, delta: 1e-3 }), ..Termination::evals(100) };
        assert_eq!(t.check(&archive(&[1.0; 5]), 0.0, None), None);
        assert_eq!(t.check(&archive(&[1.0; 6]), 0.0, None), Some(StopReason::Stagnation));
        // a small improvement below delta does not reset the window
        assert_eq!(t.check(&archive(&[1.0, 1.0, 0.9995, 1.0, 1.0, 1.0]), 0.0, None), Some(StopReason::Stagnation));
        assert_eq!(t.check(&archive(&[1.0, 1.0, 0.5, 1.0, 1.0, 1.0]), 0.0, None), None);
    }

    #[test]
    fn ei_threshold_and_target() {
        let t = Termination { ei_threshold: Some(1e-6), target: Some(0.1), ..Termination::evals(100) };
        assert_eq!(t.check(&archive(&[1.0]), 0.0, Some(1e-7)), Some(StopReason::EiThreshold));
        assert_eq!(t.check(&archive(&[1.0]), 0.0, Some(1e-3)), None);
        assert_eq!(t.check(&archive(&[1.0, 0.05]), 0.0, None), Some(StopReason::Target));
        assert!(Termination::default().validate().is_err());
    }
}
