//! Topology event streams: the plain-text log format, sliding-window
//! deletion synthesis and offered-rate pacing.
//!
//! One event per line, whitespace separated, `#` starts a comment line:
//!
//! ```text
//! [a|d] <timestamp> <src> <dst> [<weight>]
//! ```
//!
//! A missing marker means `a`, a missing weight means the configured default
//! weight. Deletions are carried as negative capacity deltas.

use std::collections::VecDeque;
use std::fmt;
use std::io::BufRead;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::VertexId;

/// Dataset time, in whatever unit the log uses.
pub type Timestamp = u64;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: weight must be a positive integer, got `{weight}`")]
    Weight { line: usize, weight: String },
    #[error("line {line}: timestamp {timestamp} precedes previous timestamp {previous}")]
    OutOfOrder {
        line: usize,
        timestamp: Timestamp,
        previous: Timestamp,
    },
    #[error("event {index} is out of timestamp order")]
    Unsorted { index: usize },
    #[error("event {index} is a deletion; the window transform expects an add-only stream")]
    NotAddOnly { index: usize },
    #[error("invalid stream configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single change of aggregate capacity on the ordered pair `(src, dst)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TopologyEvent {
    pub timestamp: Timestamp,
    pub src: VertexId,
    pub dst: VertexId,
    /// Positive for additions, negative for deletions, never zero.
    pub capacity_delta: i64,
}

impl TopologyEvent {
    pub fn add(timestamp: Timestamp, src: VertexId, dst: VertexId, weight: i64) -> Self {
        debug_assert!(weight > 0);
        TopologyEvent {
            timestamp,
            src,
            dst,
            capacity_delta: weight,
        }
    }

    pub fn delete(timestamp: Timestamp, src: VertexId, dst: VertexId, weight: i64) -> Self {
        debug_assert!(weight > 0);
        TopologyEvent {
            timestamp,
            src,
            dst,
            capacity_delta: -weight,
        }
    }

    pub fn is_delete(&self) -> bool {
        self.capacity_delta < 0
    }

    pub fn weight(&self) -> i64 {
        self.capacity_delta.abs()
    }
}

impl fmt::Display for TopologyEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let marker = if self.is_delete() { 'd' } else { 'a' };
        write!(
            f,
            "{} {} {} {} {}",
            marker,
            self.timestamp,
            self.src,
            self.dst,
            self.weight()
        )
    }
}

/// Stream shaping options.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    /// Sliding window size in dataset time units.
    pub window: Option<Timestamp>,
    /// Offered events per wall-clock second.
    pub offered_rate: Option<f64>,
    /// Capacity assigned to lines without a weight field.
    pub default_weight: i64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            window: None,
            offered_rate: None,
            default_weight: 1,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        if self.window == Some(0) {
            return Err(StreamError::Config("window size must be positive".into()));
        }
        if let Some(rate) = self.offered_rate {
            if !rate.is_finite() || rate <= 0.0 {
                return Err(StreamError::Config(format!(
                    "offered rate must be positive, got {rate}"
                )));
            }
        }
        if self.default_weight <= 0 {
            return Err(StreamError::Config("default weight must be positive".into()));
        }
        Ok(())
    }
}

fn parse_uint(token: &str, what: &str, line: usize) -> Result<u64, StreamError> {
    token.parse::<u64>().map_err(|_| StreamError::Parse {
        line,
        reason: format!("invalid {what} `{token}`"),
    })
}

/// Decodes one non-comment log line. `line_no` is only used for diagnostics.
pub fn parse_event_line(
    line: &str,
    line_no: usize,
    config: &StreamConfig,
) -> Result<TopologyEvent, StreamError> {
    let mut tokens: Vec<&str> = line.split_whitespace().collect();
    let delete = match tokens.first() {
        Some(&"a") => {
            tokens.remove(0);
            false
        }
        Some(&"d") => {
            tokens.remove(0);
            true
        }
        _ => false,
    };
    if tokens.len() < 3 || tokens.len() > 4 {
        return Err(StreamError::Parse {
            line: line_no,
            reason: format!("expected `[a|d] <ts> <src> <dst> [<weight>]`, got `{}`", line.trim()),
        });
    }
    let timestamp = parse_uint(tokens[0], "timestamp", line_no)?;
    let src = parse_uint(tokens[1], "source vertex", line_no)?;
    let dst = parse_uint(tokens[2], "destination vertex", line_no)?;
    let weight = match tokens.get(3) {
        None => config.default_weight,
        Some(tok) => match tok.parse::<i64>() {
            Ok(w) if w > 0 => w,
            Ok(_) => {
                return Err(StreamError::Weight {
                    line: line_no,
                    weight: tok.to_string(),
                })
            }
            Err(_) => {
                return Err(StreamError::Parse {
                    line: line_no,
                    reason: format!("invalid weight `{tok}`"),
                })
            }
        },
    };
    Ok(if delete {
        TopologyEvent::delete(timestamp, src, dst, weight)
    } else {
        TopologyEvent::add(timestamp, src, dst, weight)
    })
}

/// Reads events from a line-oriented log, skipping blanks and comments and
/// rejecting timestamps that go backwards.
pub struct EventReader<R> {
    reader: R,
    config: StreamConfig,
    line_no: usize,
    last_ts: Option<Timestamp>,
    buf: String,
}

impl<R: BufRead> EventReader<R> {
    pub fn new(reader: R, config: StreamConfig) -> Self {
        EventReader {
            reader,
            config,
            line_no: 0,
            last_ts: None,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<TopologyEvent, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let trimmed = self.buf.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let ev = match parse_event_line(trimmed, self.line_no, &self.config) {
                Ok(ev) => ev,
                Err(e) => return Some(Err(e)),
            };
            if let Some(prev) = self.last_ts {
                if ev.timestamp < prev {
                    return Some(Err(StreamError::OutOfOrder {
                        line: self.line_no,
                        timestamp: ev.timestamp,
                        previous: prev,
                    }));
                }
            }
            self.last_ts = Some(ev.timestamp);
            return Some(Ok(ev));
        }
    }
}

/// Streaming sliding-window adapter.
///
/// Before each input event at time `T`, every live addition older than
/// `T - window` is retracted with a deletion stamped `T`. Deletions come out
/// before the event that triggered them so the window holds at every prefix.
pub struct SlidingWindow<I> {
    inner: I,
    window: Timestamp,
    live: VecDeque<TopologyEvent>,
    pending: VecDeque<TopologyEvent>,
    last_ts: Option<Timestamp>,
    index: usize,
    failed: bool,
}

impl<I> SlidingWindow<I> {
    pub fn new(inner: I, window: Timestamp) -> Result<Self, StreamError> {
        if window == 0 {
            return Err(StreamError::Config("window size must be positive".into()));
        }
        Ok(SlidingWindow {
            inner,
            window,
            live: VecDeque::new(),
            pending: VecDeque::new(),
            last_ts: None,
            index: 0,
            failed: false,
        })
    }
}

impl<I> Iterator for SlidingWindow<I>
where
    I: Iterator<Item = Result<TopologyEvent, StreamError>>,
{
    type Item = Result<TopologyEvent, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(ev) = self.pending.pop_front() {
            return Some(Ok(ev));
        }
        if self.failed {
            return None;
        }
        let ev = match self.inner.next()? {
            Ok(ev) => ev,
            Err(e) => {
                self.failed = true;
                return Some(Err(e));
            }
        };
        let index = self.index;
        self.index += 1;
        if ev.is_delete() {
            self.failed = true;
            return Some(Err(StreamError::NotAddOnly { index }));
        }
        if self.last_ts.is_some_and(|prev| ev.timestamp < prev) {
            self.failed = true;
            return Some(Err(StreamError::Unsorted { index }));
        }
        self.last_ts = Some(ev.timestamp);
        while let Some(old) = self.live.front() {
            if old.timestamp.saturating_add(self.window) < ev.timestamp {
                let old = self.live.pop_front().unwrap();
                self.pending
                    .push_back(TopologyEvent::delete(ev.timestamp, old.src, old.dst, old.weight()));
            } else {
                break;
            }
        }
        self.live.push_back(ev);
        self.pending.push_back(ev);
        self.pending.pop_front().map(Ok)
    }
}

/// Eager form of [`SlidingWindow`] over an in-memory add-only stream.
pub fn sliding_window_transform(
    stream: &[TopologyEvent],
    window: Timestamp,
) -> Result<Vec<TopologyEvent>, StreamError> {
    SlidingWindow::new(stream.iter().copied().map(Ok), window)?.collect()
}

/// Releases items no faster than a fixed long-run rate.
#[derive(Debug)]
pub struct Throttle {
    interval: Option<Duration>,
    start: Option<Instant>,
    released: u64,
}

impl Throttle {
    pub fn new(rate: Option<f64>) -> Result<Self, StreamError> {
        let interval = match rate {
            None => None,
            Some(r) if r > 0.0 && r.is_finite() => Some(Duration::from_secs_f64(1.0 / r)),
            Some(r) => {
                return Err(StreamError::Config(format!(
                    "offered rate must be positive, got {r}"
                )))
            }
        };
        Ok(Throttle {
            interval,
            start: None,
            released: 0,
        })
    }

    /// How long the caller has to wait before the next release, without
    /// consuming it.
    pub fn delay(&self) -> Duration {
        match (self.interval, self.start) {
            (Some(interval), Some(start)) => {
                let due = interval.mul_f64(self.released as f64);
                due.saturating_sub(start.elapsed())
            }
            _ => Duration::ZERO,
        }
    }

    /// Blocks until the next item may be released, then counts it.
    pub fn acquire(&mut self) {
        if self.interval.is_some() {
            if self.start.is_none() {
                self.start = Some(Instant::now());
            }
            let wait = self.delay();
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        self.released += 1;
    }

    pub fn is_limited(&self) -> bool {
        self.interval.is_some()
    }
}

/// Iterator adapter produced by [`throttle`].
pub struct Paced<I> {
    inner: I,
    throttle: Throttle,
}

impl<I: Iterator> Iterator for Paced<I> {
    type Item = I::Item;

    fn next(&mut self) -> Option<I::Item> {
        let item = self.inner.next()?;
        self.throttle.acquire();
        Some(item)
    }
}

/// Paces `stream` at `rate` items per second; `None` passes through.
pub fn throttle<I: Iterator>(stream: I, rate: Option<f64>) -> Result<Paced<I>, StreamError> {
    Ok(Paced {
        inner: stream,
        throttle: Throttle::new(rate)?,
    })
}
