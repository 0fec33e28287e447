//! Global relabel scheduling.
//!
//! A global relabel drains all in-flight messages with lifts disabled, resets
//! every height, then lets the source, the sink and every vertex in deficit
//! broadcast until heights settle on exact residual distances. The engine
//! drives the phases; this module owns the trigger rule and the phase
//! bookkeeping.

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct GrConfig {
    /// Lifts since the last relabel that force a new one. `None` uses the
    /// historical maximum vertex count.
    pub lift_threshold: Option<u64>,
    /// Minimum spacing between relabels as a multiple of the last one's
    /// duration.
    pub time_factor: f64,
    /// Floor on the spacing between relabels.
    pub min_interval: Duration,
}

impl Default for GrConfig {
    fn default() -> Self {
        GrConfig {
            lift_threshold: None,
            time_factor: 10.0,
            min_interval: Duration::from_millis(50),
        }
    }
}

impl GrConfig {
    pub fn validate(&self) -> Result<(), GrError> {
        if self.lift_threshold == Some(0) {
            return Err(GrError::Config("lift threshold must be positive".into()));
        }
        if !(self.time_factor.is_finite() && self.time_factor > 0.0) {
            return Err(GrError::Config(format!(
                "time factor must be positive, got {}",
                self.time_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrPhase {
    Normal,
    Drain,
    RelabelUp,
    RelabelDown,
}

impl GrPhase {
    fn next(self) -> GrPhase {
        match self {
            GrPhase::Normal => GrPhase::Drain,
            GrPhase::Drain => GrPhase::RelabelUp,
            GrPhase::RelabelUp => GrPhase::RelabelDown,
            GrPhase::RelabelDown => GrPhase::Normal,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GrError {
    #[error("global relabel cannot move from {from:?} to {to:?}")]
    Transition { from: GrPhase, to: GrPhase },
    #[error("invalid global relabel configuration: {0}")]
    Config(String),
}

/// Phase machine and trigger statistics. Times are offsets from an engine
/// specific epoch (wall clock or a logical clock).
#[derive(Debug, Clone)]
pub struct GrState {
    pub config: GrConfig,
    pub phase: GrPhase,
    pub lifts_since_last_gr: u64,
    pub last_gr_duration: Duration,
    pub last_gr_end: Duration,
    pub completed: u64,
    started_at: Duration,
    lift_baseline: u64,
}

impl GrState {
    pub fn new(config: GrConfig) -> Self {
        let last_gr_duration = config.min_interval.div_f64(config.time_factor);
        GrState {
            config,
            phase: GrPhase::Normal,
            lifts_since_last_gr: 0,
            last_gr_duration,
            last_gr_end: Duration::ZERO,
            completed: 0,
            started_at: Duration::ZERO,
            lift_baseline: 0,
        }
    }

    pub fn lift_threshold(&self, n_max: u64) -> u64 {
        self.config.lift_threshold.unwrap_or(n_max.max(1))
    }

    /// Updates the lift count from the engine's running total.
    pub fn observe_lifts(&mut self, total_lifts: u64) {
        self.lifts_since_last_gr = total_lifts.saturating_sub(self.lift_baseline);
    }

    /// Spacing the time condition currently requires.
    pub fn required_interval(&self) -> Duration {
        self.last_gr_duration
            .mul_f64(self.config.time_factor)
            .max(self.config.min_interval)
    }

    pub fn check_trigger(&self, now: Duration, n_max: u64) -> bool {
        if self.phase != GrPhase::Normal {
            return false;
        }
        self.lifts_since_last_gr >= self.lift_threshold(n_max)
            || now.saturating_sub(self.last_gr_end) >= self.required_interval()
    }

    /// Moves to `to`, which must be the successor of the current phase.
    pub fn advance(&mut self, to: GrPhase, now: Duration) -> Result<(), GrError> {
        if self.phase.next() != to {
            return Err(GrError::Transition {
                from: self.phase,
                to,
            });
        }
        match to {
            GrPhase::Drain => self.started_at = now,
            GrPhase::Normal => {
                self.last_gr_duration = now.saturating_sub(self.started_at);
                self.last_gr_end = now;
                self.completed += 1;
            }
            _ => {}
        }
        self.phase = to;
        Ok(())
    }

    /// Resets the lift counter at the end of a relabel.
    pub fn reset_lifts(&mut self, total_lifts: u64) {
        self.lift_baseline = total_lifts;
        self.lifts_since_last_gr = 0;
    }
}
