//! Command line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{self, build_scenario_explained, load_map, parse_settings, PresetRouter};
use crate::error::{Error, Result};
use crate::map::parse_wkt;
use crate::reports::{write_reports, ReportBundle};
use crate::sim::{self, Scenario};

pub const OUT_DIR_ENV: &str = "DRIFTNET_OUT";
pub const DEFAULT_OUT_DIR: &str = "reports";

#[derive(Debug, Parser)]
#[command(name = "driftnet", version, about = "Delay tolerant network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its reports.
    Run {
        #[command(flatten)]
        input: Input,
        /// Report directory (default: $DRIFTNET_OUT or ./reports).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Override Scenario.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Print every effective setting and where it came from.
        #[arg(long)]
        explain: bool,
    },
    /// Run one scenario over a range of seeds, one report directory per seed.
    Batch {
        #[command(flatten)]
        input: Input,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Inclusive seed range, e.g. 1..10.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: (u64, u64),
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Check a settings file without running it.
    Validate {
        #[command(flatten)]
        input: Input,
    },
    /// Summarise a WKT road map.
    DescribeMap { file: PathBuf },
    /// Bundled Palu scenarios.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Debug, Args)]
struct Input {
    /// Settings file.
    #[arg(short, long)]
    config: PathBuf,
    /// WKT road map, overriding MapBasedMovement.mapFile.
    #[arg(short, long)]
    map: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's settings, or write them to a file.
    Emit {
        name: String,
        #[arg(long, default_value = "epidemic", value_parser = ["epidemic", "snw"])]
        router: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn parse_seed_range(s: &str) -> std::result::Result<(u64, u64), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|_| format!("bad seed {a:?}"))?;
    let b: u64 = b.trim().parse().map_err(|_| format!("bad seed {b:?}"))?;
    if a > b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok((a, b))
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn load(input: &Input) -> Result<(Scenario, Vec<config::ExplainLine>)> {
    let text = fs::read_to_string(&input.config).map_err(|e| Error::io(&input.config, e))?;
    let doc = parse_settings(&text)?;
    let base = input.config.parent();
    let map = load_map(&doc, base, input.map.as_deref())?;
    build_scenario_explained(&doc, map)
}

fn summary(bundle: &ReportBundle) -> String {
    let s = &bundle.message_stats;
    format!(
        "created={} delivered={} relayed={} dropped={} expired={} delivery_prob={:.4}",
        s.created, s.delivered, s.relayed, s.dropped, s.expired, s.delivery_prob
    )
}

fn run_seed(scenario: &Scenario, seed: u64, dir: &Path) -> Result<ReportBundle> {
    let mut sc = scenario.clone();
    sc.seed = seed;
    let bundle = sim::run(sc)?;
    write_reports(&bundle, dir)?;
    Ok(bundle)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    let w = |out: &mut dyn Write, line: String| {
        let _ = writeln!(out, "{line}");
    };
    match cmd {
        Command::Run {
            input,
            out: dir,
            seed,
            explain,
        } => {
            let (scenario, lines) = load(&input)?;
            if explain {
                for l in &lines {
                    w(out, l.to_string());
                }
            }
            let dir = out_dir(dir);
            let seed = seed.unwrap_or(scenario.seed);
            let bundle = run_seed(&scenario, seed, &dir)?;
            w(out, format!("{} seed={} {}", scenario.name, seed, summary(&bundle)));
            w(out, format!("reports written to {}", dir.display()));
        }
        Command::Batch {
            input,
            out: dir,
            seeds: (a, b),
            parallel,
        } => {
            let (scenario, _) = load(&input)?;
            let dir = out_dir(dir);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(parallel.max(1))
                .build()
                .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
            let results: Vec<(u64, Result<ReportBundle>)> = pool.install(|| {
                (a..=b)
                    .into_par_iter()
                    .map(|seed| (seed, run_seed(&scenario, seed, &dir.join(format!("seed-{seed}")))))
                    .collect()
            });
            let mut first_err = None;
            for (seed, r) in results {
                match r {
                    Ok(bundle) => w(out, format!("seed={seed} {}", summary(&bundle))),
                    Err(e) => {
                        w(out, format!("seed={seed} failed: {e}"));
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
            w(out, format!("reports written to {}", dir.display()));
        }
        Command::Validate { input } => {
            let (scenario, _) = load(&input)?;
            w(
                out,
                format!(
                    "ok: {} with {} nodes, {} ticks of {} s",
                    scenario.name,
                    scenario.node_count(),
                    scenario.tick_count(),
                    scenario.tick
                ),
            );
        }
        Command::DescribeMap { file } => {
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let g = parse_wkt(&text)?;
            let s = g.summary();
            w(out, format!("vertices: {}", s.vertices));
            w(out, format!("edges: {}", s.edges));
            w(out, format!("components: {}", s.components));
            w(out, format!("total_length_m: {:.1}", s.total_length));
            if s.vertices > 0 {
                w(out, format!("bbox: {:.1},{:.1} .. {:.1},{:.1}", s.min.x, s.min.y, s.max.x, s.max.y));
            }
        }
        Command::Preset { action } => match action {
            PresetAction::List => {
                for name in config::preset_names() {
                    w(out, format!("{name:14} {}", config::preset_description(name).unwrap_or("")));
                }
            }
            PresetAction::Emit {
                name,
                router,
                out: file,
            } => {
                let router = PresetRouter::from_name(&router).expect("clap restricts router names");
                let text = config::preset_settings(&name, router)?;
                match file {
                    Some(path) => {
                        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                        w(out, format!("wrote {}", path.display()));
                    }
                    None => {
                        let _ = out.write_all(text.as_bytes());
                    }
                }
            }
        },
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("1..5"), Ok((1, 5)));
        assert_eq!(parse_seed_range("3..3"), Ok((3, 3)));
        assert!(parse_seed_range("5..1").is_err());
        assert!(parse_seed_range("5").is_err());
    }

    #[test]
    fn preset_list_prints_eight() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run_cli(["driftnet", "preset", "list"], &mut out, &mut err), 0);
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 8);
    }

    #[test]
    fn unknown_preset_is_config_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run_cli(["driftnet", "preset", "emit", "nope"], &mut out, &mut err), 1);
    }

    #[test]
    fn missing_settings_file_is_io_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(
            ["driftnet", "validate", "-c", "/nonexistent/driftnet.txt"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 2);
    }
}
