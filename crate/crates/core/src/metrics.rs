//! Per-query records, the stability score and throughput statistics.

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::event::Timestamp;
use crate::VertexId;

/// Share of `current` that also appeared in `previous`, in percent. An empty
/// current set scores 100.
pub fn stability_score(current: &BTreeSet<VertexId>, previous: &BTreeSet<VertexId>) -> f64 {
    if current.is_empty() {
        return 100.0;
    }
    let kept = current.intersection(previous).count();
    kept as f64 * 100.0 / current.len() as f64
}

/// Decides when a query fires: at the first event whose timestamp exceeds
/// the previous trigger by more than the interval. The first event seen
/// starts the clock.
#[derive(Debug, Clone)]
pub struct QuerySchedule {
    interval: Timestamp,
    last: Option<Timestamp>,
}

impl QuerySchedule {
    pub fn new(interval: Timestamp) -> Self {
        QuerySchedule {
            interval,
            last: None,
        }
    }

    /// Call before ingesting an event stamped `ts`. Returns true if a query
    /// is due first.
    pub fn observe(&mut self, ts: Timestamp) -> bool {
        match self.last {
            None => {
                self.last = Some(ts);
                false
            }
            Some(last) if ts > last.saturating_add(self.interval) => {
                self.last = Some(ts);
                true
            }
            Some(_) => false,
        }
    }
}

/// One output line per query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryRecord {
    pub trigger_timestamp: Timestamp,
    pub events_ingested: u64,
    pub flow_value: u64,
    pub latency_ms: f64,
    pub stability_pct: f64,
    /// `None` when the segment took no measurable time.
    pub segment_events_per_sec: Option<f64>,
}

impl QueryRecord {
    pub const TSV_HEADER: &'static str =
        "triggerTimestamp\teventsIngested\tflowValue\tlatencyMs\tstabilityPct\tsegmentEventsPerSec";

    pub fn to_tsv(&self) -> String {
        let rate = self
            .segment_events_per_sec
            .map_or_else(|| "-".to_string(), |r| format!("{r:.1}"));
        format!(
            "{}\t{}\t{}\t{:.3}\t{:.2}\t{}",
            self.trigger_timestamp,
            self.events_ingested,
            self.flow_value,
            self.latency_ms,
            self.stability_pct,
            rate
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("records always serialise")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub events: u64,
    pub duration: Duration,
}

/// Events per second over inter-query segments.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ThroughputSummary {
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub segments: usize,
    /// Zero-duration segments left out of the statistics.
    pub excluded: usize,
}

impl ThroughputSummary {
    pub fn from_segments(segments: &[Segment]) -> Self {
        let mut rates: Vec<f64> = segments
            .iter()
            .filter(|s| !s.duration.is_zero())
            .map(|s| s.events as f64 / s.duration.as_secs_f64())
            .collect();
        let excluded = segments.len() - rates.len();
        rates.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));
        let median = match rates.len() {
            0 => None,
            n if n % 2 == 1 => Some(rates[n / 2]),
            n => Some((rates[n / 2 - 1] + rates[n / 2]) / 2.0),
        };
        ThroughputSummary {
            median,
            min: rates.first().copied(),
            max: rates.last().copied(),
            segments: segments.len(),
            excluded,
        }
    }
}

/// End-of-run totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub events: u64,
    pub queries: usize,
    pub throughput: ThroughputSummary,
    pub mean_latency_ms: Option<f64>,
    pub mean_stability_pct: Option<f64>,
}

impl RunSummary {
    pub fn new(events: u64, records: &[QueryRecord], segments: &[Segment]) -> Self {
        let mean = |f: fn(&QueryRecord) -> f64| {
            (!records.is_empty()).then(|| records.iter().map(f).sum::<f64>() / records.len() as f64)
        };
        RunSummary {
            events,
            queries: records.len(),
            throughput: ThroughputSummary::from_segments(segments),
            mean_latency_ms: mean(|r| r.latency_ms),
            mean_stability_pct: mean(|r| r.stability_pct),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summaries always serialise")
    }

    /// `# key value` comment lines for the tab-separated output.
    pub fn to_tsv_comment(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        format!(
            "# events {}\n# queries {}\n# throughput_median {}\n# throughput_min {}\n# throughput_max {}\n# throughput_excluded_segments {}\n# mean_latency_ms {}\n# mean_stability_pct {}",
            self.events,
            self.queries,
            opt(self.throughput.median),
            opt(self.throughput.min),
            opt(self.throughput.max),
            self.throughput.excluded,
            opt(self.mean_latency_ms),
            opt(self.mean_stability_pct),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Tsv,
    JsonLines,
}

/// Writes records in `format`, followed by the summary.
pub fn write_report<W: Write>(
    out: &mut W,
    format: OutputFormat,
    records: &[QueryRecord],
    summary: &RunSummary,
) -> io::Result<()> {
    match format {
        OutputFormat::Tsv => {
            writeln!(out, "{}", QueryRecord::TSV_HEADER)?;
            for r in records {
                writeln!(out, "{}", r.to_tsv())?;
            }
            writeln!(out, "{}", summary.to_tsv_comment())?;
        }
        OutputFormat::JsonLines => {
            for r in records {
                writeln!(out, "{}", r.to_json())?;
            }
            writeln!(out, "{{\"summary\":{}}}", summary.to_json())?;
        }
    }
    Ok(())
}
