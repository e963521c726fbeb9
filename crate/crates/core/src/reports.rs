//! Run statistics and the four text reports.
//!
//! Every file starts with `# driftnet <ReportName> scenario=<name> seed=<seed>`.
//! Statistics are `key: value` lines; record reports are space separated
//! columns announced by a `# columns:` line. Reals use four decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_INTERVAL: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportKind {
    MessageStats,
    DeliveredMessages,
    MessageDelay,
    BufferOccupancy,
}

impl ReportKind {
    pub const ALL: [ReportKind; 4] = [
        ReportKind::MessageStats,
        ReportKind::DeliveredMessages,
        ReportKind::MessageDelay,
        ReportKind::BufferOccupancy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::MessageStats => "MessageStatsReport",
            ReportKind::DeliveredMessages => "DeliveredMessagesReport",
            ReportKind::MessageDelay => "MessageDelayReport",
            ReportKind::BufferOccupancy => "BufferOccupancyReport",
        }
    }

    pub fn from_name(name: &str) -> Option<ReportKind> {
        ReportKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn file_name(self) -> String {
        format!("{}.txt", self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSettings {
    pub kinds: Vec<ReportKind>,
    pub sample_interval: f64,
    /// Include stationary nodes in buffer occupancy samples.
    pub include_static: bool,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            kinds: ReportKind::ALL.to_vec(),
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            include_static: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveredRecord {
    pub time: f64,
    pub message_id: String,
    pub size: u64,
    pub hopcount: usize,
    pub latency: f64,
    pub source: String,
    pub destination: String,
    pub remaining_ttl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRecord {
    pub delay: f64,
    pub cumulative_delivery_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferSample {
    pub time: f64,
    pub mean_occupancy_pct: f64,
    pub variance_pct2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MessageStats {
    pub created: u64,
    pub started: u64,
    pub relayed: u64,
    pub aborted: u64,
    pub dropped: u64,
    pub expired: u64,
    pub delivered: u64,
    pub delivery_prob: f64,
    /// NaN when nothing was delivered.
    pub overhead_ratio: f64,
    pub latency_avg: f64,
    pub latency_med: f64,
    pub hopcount_avg: f64,
    pub hopcount_med: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub scenario: String,
    pub seed: u64,
    pub kinds: Vec<ReportKind>,
    pub message_stats: MessageStats,
    pub delivered: Vec<DeliveredRecord>,
    pub delays: Vec<DelayRecord>,
    pub buffer_samples: Vec<BufferSample>,
    /// Transfers still running when the horizon was reached.
    pub in_flight: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Created,
    Started,
    Relayed,
    Aborted,
    Dropped,
    Expired,
    Delivered(DeliveredRecord),
}

#[derive(Debug, Default, Clone)]
pub struct ReportCollector {
    created: u64,
    started: u64,
    relayed: u64,
    aborted: u64,
    dropped: u64,
    expired: u64,
    delivered: Vec<DeliveredRecord>,
    samples: Vec<BufferSample>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl ReportCollector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_event(&mut self, kind: EventKind) {
        match kind {
            EventKind::Created => self.created += 1,
            EventKind::Started => self.started += 1,
            EventKind::Relayed => self.relayed += 1,
            EventKind::Aborted => self.aborted += 1,
            EventKind::Dropped => self.dropped += 1,
            EventKind::Expired => self.expired += 1,
            EventKind::Delivered(rec) => {
                self.relayed += 1;
                self.delivered.push(rec);
            }
        }
    }

    pub fn delivered(&self) -> &[DeliveredRecord] {
        &self.delivered
    }

    pub fn samples(&self) -> &[BufferSample] {
        &self.samples
    }

    /// Appends a sample over the given occupancy percentages.
    pub fn sample_buffers<I>(&mut self, occupancies: I, now: f64) -> BufferSample
    where
        I: IntoIterator<Item = f64>,
    {
        let sample = buffer_sample(occupancies, now);
        self.samples.push(sample);
        sample
    }

    pub fn stats(&self) -> MessageStats {
        let delivered = self.delivered.len() as u64;
        let latencies: Vec<f64> = self.delivered.iter().map(|d| d.latency).collect();
        let hops: Vec<f64> = self.delivered.iter().map(|d| d.hopcount as f64).collect();
        MessageStats {
            created: self.created,
            started: self.started,
            relayed: self.relayed,
            aborted: self.aborted,
            dropped: self.dropped,
            expired: self.expired,
            delivered,
            delivery_prob: if self.created == 0 {
                0.0
            } else {
                delivered as f64 / self.created as f64
            },
            overhead_ratio: if delivered == 0 {
                f64::NAN
            } else {
                (self.relayed as f64 - delivered as f64) / delivered as f64
            },
            latency_avg: mean(&latencies),
            latency_med: median(&latencies),
            hopcount_avg: mean(&hops),
            hopcount_med: median(&hops),
        }
    }

    pub fn finish(self, scenario: &str, seed: u64, kinds: &[ReportKind], in_flight: u64) -> ReportBundle {
        let message_stats = self.stats();
        let mut sorted: Vec<f64> = self.delivered.iter().map(|d| d.latency).collect();
        sorted.sort_by(f64::total_cmp);
        let created = self.created.max(1) as f64;
        let delays = sorted
            .iter()
            .enumerate()
            .map(|(i, &delay)| DelayRecord {
                delay,
                cumulative_delivery_prob: (i + 1) as f64 / created,
            })
            .collect();
        ReportBundle {
            scenario: scenario.to_string(),
            seed,
            kinds: kinds.to_vec(),
            message_stats,
            delivered: self.delivered,
            delays,
            buffer_samples: self.samples,
            in_flight,
        }
    }
}

/// Mean and population variance of occupancy percentages.
pub fn buffer_sample<I>(occupancies: I, now: f64) -> BufferSample
where
    I: IntoIterator<Item = f64>,
{
    let values: Vec<f64> = occupancies.into_iter().collect();
    if values.is_empty() {
        return BufferSample {
            time: now,
            mean_occupancy_pct: 0.0,
            variance_pct2: 0.0,
        };
    }
    let m = mean(&values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    BufferSample {
        time: now,
        mean_occupancy_pct: m,
        variance_pct2: var,
    }
}

fn header(out: &mut String, kind: ReportKind, bundle: &ReportBundle) {
    let _ = writeln!(
        out,
        "# driftnet {} scenario={} seed={}",
        kind.name(),
        bundle.scenario,
        bundle.seed
    );
}

pub fn render(kind: ReportKind, bundle: &ReportBundle) -> String {
    let mut out = String::new();
    header(&mut out, kind, bundle);
    match kind {
        ReportKind::MessageStats => {
            let s = &bundle.message_stats;
            for (k, v) in [
                ("created", s.created),
                ("started", s.started),
                ("relayed", s.relayed),
                ("aborted", s.aborted),
                ("dropped", s.dropped),
                ("expired", s.expired),
                ("delivered", s.delivered),
            ] {
                let _ = writeln!(out, "{k}: {v}");
            }
            for (k, v) in [
                ("delivery_prob", s.delivery_prob),
                ("overhead_ratio", s.overhead_ratio),
                ("latency_avg", s.latency_avg),
                ("latency_med", s.latency_med),
                ("hopcount_avg", s.hopcount_avg),
                ("hopcount_med", s.hopcount_med),
            ] {
                let _ = writeln!(out, "{k}: {v:.4}");
            }
        }
        ReportKind::DeliveredMessages => {
            out.push_str(
                "# columns: time message_id size hopcount latency source destination remaining_ttl\n",
            );
            for d in &bundle.delivered {
                let _ = writeln!(
                    out,
                    "{:.4} {} {} {} {:.4} {} {} {:.4}",
                    d.time, d.message_id, d.size, d.hopcount, d.latency, d.source, d.destination, d.remaining_ttl
                );
            }
        }
        ReportKind::MessageDelay => {
            out.push_str("# columns: delay cumulative_delivery_prob\n");
            for d in &bundle.delays {
                let _ = writeln!(out, "{:.4} {:.4}", d.delay, d.cumulative_delivery_prob);
            }
        }
        ReportKind::BufferOccupancy => {
            out.push_str("# columns: time mean_occupancy_pct variance_pct2\n");
            for s in &bundle.buffer_samples {
                let _ = writeln!(
                    out,
                    "{:.4} {:.4} {:.4}",
                    s.time, s.mean_occupancy_pct, s.variance_pct2
                );
            }
        }
    }
    out
}

/// Writes the bundle's selected reports into `out_dir`, creating it.
pub fn write_reports(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut paths = Vec::new();
    for &kind in &bundle.kinds {
        let path = out_dir.join(kind.file_name());
        fs::write(&path, render(kind, bundle)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
