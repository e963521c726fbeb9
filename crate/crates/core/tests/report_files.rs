mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use driftnet::config::PresetRouter;
use driftnet::reports::{write_reports, ReportKind};
use driftnet::sim::run;

use common::preset_scenario;

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect()
}

fn stats_map(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn read(dir: &Path, kind: ReportKind) -> String {
    fs::read_to_string(dir.join(kind.file_name())).unwrap()
}

#[test]
fn report_files_agree_with_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run(preset_scenario("density-400", PresetRouter::Epidemic, 3)).unwrap();
    let written = write_reports(&bundle, dir.path()).unwrap();
    assert_eq!(written.len(), 4);

    let stats = stats_map(&read(dir.path(), ReportKind::MessageStats));
    let delivered = data_rows(&read(dir.path(), ReportKind::DeliveredMessages));
    let delays = data_rows(&read(dir.path(), ReportKind::MessageDelay));
    let buffers = data_rows(&read(dir.path(), ReportKind::BufferOccupancy));

    let n: usize = stats["delivered"].parse().unwrap();
    assert!(n > 0, "scenario should deliver something");
    assert_eq!(delivered.len(), n);
    assert_eq!(delays.len(), n);

    let latencies: Vec<f64> = delivered.iter().map(|r| r[4].parse().unwrap()).collect();
    let hops: Vec<f64> = delivered.iter().map(|r| r[3].parse().unwrap()).collect();
    let mut sorted = latencies.clone();
    sorted.sort_by(f64::total_cmp);
    let delay_col: Vec<f64> = delays.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(delay_col, sorted);

    let created: f64 = stats["created"].parse().unwrap();
    let last_cum: f64 = delays.last().unwrap()[1].parse().unwrap();
    assert_eq!(format!("{:.4}", n as f64 / created), stats["delivery_prob"]);
    assert!((last_cum - n as f64 / created).abs() < 1e-4);

    assert_eq!(format!("{:.4}", median(latencies)), stats["latency_med"]);
    assert_eq!(format!("{:.4}", median(hops)), stats["hopcount_med"]);

    for r in &delivered {
        assert_eq!(r[5], "s0");
        assert_eq!(r[6], "b0");
        let (lat, rem): (f64, f64) = (r[4].parse().unwrap(), r[7].parse().unwrap());
        assert!((lat + rem - 1800.0).abs() < 1e-3);
    }
    assert_eq!(buffers.len(), 181);
    assert_eq!(buffers[0][0], "0.0000");
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let bundle = run(preset_scenario("msgsize-psd", PresetRouter::SprayAndWait, 9)).unwrap();
        write_reports(&bundle, dir).unwrap();
    }
    for kind in ReportKind::ALL {
        assert_eq!(
            fs::read(a.path().join(kind.file_name())).unwrap(),
            fs::read(b.path().join(kind.file_name())).unwrap(),
            "{}",
            kind.name()
        );
    }
}

#[test]
fn headers_name_scenario_and_seed() {
    let bundle = run(preset_scenario("density-50", PresetRouter::Epidemic, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_reports(&bundle, dir.path()).unwrap();
    for kind in ReportKind::ALL {
        let text = read(dir.path(), kind);
        assert_eq!(
            text.lines().next().unwrap(),
            format!("# driftnet {} scenario=palu-density-50-epidemic seed=4", kind.name())
        );
    }
}
