//! Command-line front end for the digital-twin loop.
//!
//! `ndt run` executes one closed-loop scenario (warmup training, streaming
//! inference, drift detection, retraining, artifact export) and prints the
//! run summary. `ndt sweep` replays a generated traffic stream through the
//! detector once per window size and tabulates detection counts.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use ndt_core::scenario::{
    build_stream, rate_stream, run_scenario, sweep_csv, window_sweep, RunConfig,
    ScheduleSource,
};
use ndt_core::topology::TopologyGraph;

#[derive(Parser)]
#[command(name = "ndt", version, about = "Self-adaptive network digital twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write its artifacts.
    Run(RunArgs),
    /// Count detections as a function of the detector window size.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SyncMode {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    /// Topology JSON file.
    #[arg(long)]
    topology: PathBuf,

    /// Schedule JSON file, or default:<seconds> for the built-in four-phase
    /// drift schedule.
    #[arg(long, default_value = "default:400")]
    schedule: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Drift-triggered retraining; off serves the warmup model throughout.
    #[arg(long, value_enum, default_value = "on")]
    sync: SyncMode,

    /// Also score a frozen copy of the warmup model over the same stream.
    #[arg(long)]
    compare: bool,

    /// Flows generated per schedule second.
    #[arg(long, default_value_t = 5.0)]
    flows_per_second: f64,

    /// Warmup horizon in seconds; its traffic trains the first model.
    #[arg(long, default_value_t = 100.0)]
    warmup: f64,

    /// Detector significance level per window comparison.
    #[arg(long)]
    alpha: Option<f64>,

    /// Detector sliding window length in samples. The comparison cadence
    /// follows at half the window.
    #[arg(long)]
    window_size: Option<usize>,

    /// Detector recent-buffer and reference-draw size.
    #[arg(long)]
    stat_size: Option<usize>,

    /// Training epochs. Retrains on snapshots smaller than the warmup set
    /// stretch this until their optimizer-step counts match.
    #[arg(long)]
    epochs: Option<usize>,

    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,

    /// Delay budget multiplier on path propagation delay.
    #[arg(long)]
    pdb_beta: Option<f64>,

    /// Delay budget floor in seconds.
    #[arg(long)]
    pdb_floor: Option<f64>,

    /// Directory the artifacts are written to.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Topology JSON file.
    #[arg(long)]
    topology: PathBuf,

    /// Schedule JSON file, or default:<seconds>.
    #[arg(long, default_value = "default:400")]
    schedule: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Flows generated per schedule second.
    #[arg(long, default_value_t = 5.0)]
    flows_per_second: f64,

    /// Comma-separated detector window sizes.
    #[arg(long, value_delimiter = ',', default_value = "120,150,210,300,390,450")]
    windows: Vec<usize>,

    /// Detector significance level per window comparison.
    #[arg(long)]
    alpha: Option<f64>,

    /// Detector recent-buffer and reference-draw size.
    #[arg(long)]
    stat_size: Option<usize>,

    /// Optional CSV output path; the table prints to stdout either way.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::desk(args.topology, args.out, args.seed);
    cfg.schedule = ScheduleSource::parse(&args.schedule)
        .with_context(|| format!("bad --schedule {:?}", args.schedule))?;
    cfg.sync = args.sync == SyncMode::On;
    cfg.compare = args.compare;
    cfg.flows_per_second = args.flows_per_second;
    cfg.warmup_s = args.warmup;
    if let Some(w) = args.window_size {
        cfg.kswin.window_size = w;
        cfg.kswin.check_interval = (w / 2).max(1);
    }
    if let Some(a) = args.alpha {
        cfg.kswin.alpha = a;
    }
    if let Some(r) = args.stat_size {
        cfg.kswin.stat_size = r;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.train.lr = lr;
    }
    if let Some(b) = args.pdb_beta {
        cfg.sla.beta = b;
    }
    if let Some(f) = args.pdb_floor {
        cfg.sla.floor_s = f;
    }

    let out = run_scenario(&cfg).context("scenario run failed")?;
    let s = &out.summary;

    println!(
        "topology {} | seed {} | sync {} | compare {}",
        s.topology,
        s.seed,
        if s.sync { "on" } else { "off" },
        s.compare
    );
    println!(
        "records {} (warmup {}, excluded {})",
        s.records, s.warmup_records, s.excluded_flows
    );
    match s.overall_nmse_db_frozen {
        Some(f) => println!(
            "overall nmse: sync {:.2} dB, frozen {:.2} dB",
            s.overall_nmse_db_sync, f
        ),
        None => println!("overall nmse: {:.2} dB", s.overall_nmse_db_sync),
    }
    for d in &s.drifts {
        let mut line = format!(
            "drift @{} t={:.1}s D={:.3} p={:.2e}",
            d.stream_index, d.sim_time_s, d.statistic, d.p_value
        );
        match d.retrained_to {
            Some(v) => line.push_str(&format!(" -> v{v}")),
            None => line.push_str(" (suppressed)"),
        }
        if let Some(db) = d.post_mean_db_sync {
            line.push_str(&format!(" | post sync {db:.2} dB"));
        }
        if let Some(db) = d.post_mean_db_frozen {
            line.push_str(&format!(", frozen {db:.2} dB"));
        }
        if let Some(pct) = d.improvement_pct {
            line.push_str(&format!(" | mse improvement {pct:.1}%"));
        }
        println!("{line}");
    }
    println!(
        "retrains {} (suppressed {}), final version {}",
        s.retrains, s.suppressed, s.final_version
    );
    println!(
        "sla sync: predicted {} actual {} misclassified {}",
        s.sla_sync.predicted_violations,
        s.sla_sync.actual_violations,
        s.sla_sync.misclassified
    );
    if let Some(f) = &s.sla_frozen {
        println!(
            "sla frozen: predicted {} actual {} misclassified {}",
            f.predicted_violations, f.actual_violations, f.misclassified
        );
    }
    println!("artifacts in {}", out.out_dir.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let g = TopologyGraph::load(&args.topology)
        .with_context(|| format!("loading topology {}", args.topology.display()))?;
    let sched = ScheduleSource::parse(&args.schedule)
        .with_context(|| format!("bad --schedule {:?}", args.schedule))?
        .load()
        .context("loading schedule")?;

    let stream = build_stream(&g, &sched, args.flows_per_second, args.seed)
        .context("generating the traffic stream")?;
    let rates = rate_stream(&stream.records);

    let mut base = ndt_core::drift::KswinConfig::default();
    if let Some(a) = args.alpha {
        base.alpha = a;
    }
    if let Some(r) = args.stat_size {
        base.stat_size = r;
    }

    let rows = window_sweep(&rates, &base, &args.windows).context("detector sweep failed")?;
    for r in &rows {
        println!("w={} detections={}", r.window_size, r.detections);
    }
    if let Some(path) = args.out {
        fs::write(&path, sweep_csv(&rows))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("table written to {}", path.display());
    }
    Ok(())
}
