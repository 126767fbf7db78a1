//! The closed loop, end to end: warm up a first model on pre-drift traffic,
//! then stream the operational horizon through prediction, drift detection,
//! retraining, and atomic redeployment, writing artifacts for a later audit.
//!
//! One seed drives the whole run. Every random sub-stream (flow generation,
//! packet sampling, training shuffles, the detector's reference draws)
//! derives its own seed from it, so a rerun with the same config reproduces
//! every artifact byte for byte. No wall-clock value ever reaches an
//! artifact: timestamps are simulation time, positions are stream indices.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift::{DriftError, DriftEvent, KswinConfig, KswinDetector};
use crate::eval::{
    classify_and_report, nmse_db, windowed_nmse, EvalError, NmseWindow, SlaPolicy,
    ViolationReport, NMSE_WINDOW,
};
use crate::features::{label_dataset, micro_graph, LabeledRecord, LabeledSet};
use crate::sim::{derive_seed, SimError};
use crate::store::{
    LineStore, StoreError, TrafficRecord, WeightsStore, LABELED_SCHEMA, TRAFFIC_SCHEMA,
};
use crate::sync::{DeployedModel, SyncError, SyncManager};
use crate::topology::{TopologyError, TopologyGraph};
use crate::traffic::{
    generate_flows, PhaseSpec, ScenarioSchedule, TrafficError,
};
use crate::train::{planned_steps, train, TrainConfig, TrainError};
use crate::vtwin::{init_weights, predict_delay, ModelDims, ModelError};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Sub-stream tags fed to `derive_seed`.
const TAG_WARMUP_FLOWS: u64 = 0x7761_666c;
const TAG_WARMUP_SIM: u64 = 0x7761_7369;
const TAG_WARMUP_TRAIN: u64 = 0x7761_7472;
const TAG_OP_FLOWS: u64 = 0x6f70_666c;
const TAG_OP_SIM: u64 = 0x6f70_7369;
const TAG_DETECTOR: u64 = 0x6465_7465;
const TAG_RETRAIN_BASE: u64 = 0x7265_0000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad schedule spec {0:?}: expected a file path or default:<seconds>")]
    BadScheduleSpec(String),

    #[error("schedule file does not parse: {0}")]
    BadScheduleFile(#[from] serde_json::Error),

    #[error("the operational stream has no labeled records")]
    EmptyStream,

    #[error(transparent)]
    Topology(#[from] TopologyError),

    #[error(transparent)]
    Traffic(#[from] TrafficError),

    #[error(transparent)]
    Sim(#[from] SimError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Train(#[from] TrainError),

    #[error(transparent)]
    Drift(#[from] DriftError),

    #[error(transparent)]
    Store(#[from] StoreError),

    #[error(transparent)]
    Sync(#[from] SyncError),

    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Where the schedule comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSource {
    /// The built-in four-phase drift schedule over the given horizon.
    Default { total_s: f64 },
    /// JSON file holding a [`ScenarioSchedule`].
    File(PathBuf),
}

impl ScheduleSource {
    /// Parse a CLI-style spec: `default:<seconds>` or a file path.
    pub fn parse(spec: &str) -> Result<Self, ScenarioError> {
        if let Some(rest) = spec.strip_prefix("default:") {
            let total_s: f64 = rest
                .parse()
                .map_err(|_| ScenarioError::BadScheduleSpec(spec.to_string()))?;
            if !(total_s > 0.0 && total_s.is_finite()) {
                return Err(ScenarioError::BadScheduleSpec(spec.to_string()));
            }
            Ok(ScheduleSource::Default { total_s })
        } else {
            Ok(ScheduleSource::File(PathBuf::from(spec)))
        }
    }

    pub fn load(&self) -> Result<ScenarioSchedule, ScenarioError> {
        let sched = match self {
            ScheduleSource::Default { total_s } => {
                crate::traffic::default_drift_schedule(*total_s)
            }
            ScheduleSource::File(path) => {
                serde_json::from_str(&fs::read_to_string(path)?)?
            }
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// Which labeled records feed a retrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainSource {
    /// Records seen so far whose start time falls in the schedule phase
    /// containing the record that triggered the detection.
    Phase,
    /// Every record seen so far.
    Cumulative,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub topology: PathBuf,
    pub schedule: ScheduleSource,
    pub seed: u64,
    /// Drift-triggered retraining. Off means the warmup model serves the
    /// whole run and the detector never runs.
    pub sync: bool,
    /// Also score a frozen copy of the warmup model over the same stream.
    pub compare: bool,
    pub flows_per_second: f64,
    /// Horizon of the warmup traffic that trains the first model, seconds.
    pub warmup_s: f64,
    pub kswin: KswinConfig,
    pub train: TrainConfig,
    pub sla: SlaPolicy,
    pub retrain_source: RetrainSource,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Desk-scale defaults: 400 s four-phase schedule at five flows per
    /// second (2000 flows, three abrupt drifts), 100 s warmup.
    pub fn desk(topology: PathBuf, out_dir: PathBuf, seed: u64) -> Self {
        RunConfig {
            topology,
            schedule: ScheduleSource::Default { total_s: 400.0 },
            seed,
            sync: true,
            compare: true,
            flows_per_second: 5.0,
            warmup_s: 100.0,
            kswin: KswinConfig::default(),
            train: TrainConfig::default(),
            sla: SlaPolicy::default(),
            retrain_source: RetrainSource::Phase,
            out_dir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaTotals {
    pub predicted_violations: usize,
    pub actual_violations: usize,
    pub misclassified: usize,
}

impl From<&ViolationReport> for SlaTotals {
    fn from(r: &ViolationReport) -> Self {
        SlaTotals {
            predicted_violations: r.predicted_violations,
            actual_violations: r.actual_violations,
            misclassified: r.misclassified,
        }
    }
}

/// Accuracy around one detected drift, scored against the schedule's
/// regimes. The pre segment is the schedule phase before the one the
/// detector fired in; the post segment runs from the detection to the end
/// of that phase, so detection lag from a later drift does not leak a
/// foreign regime into the comparison. Windowed means average the dB series
/// over windows starting inside the segment (None when no window does), and
/// the linear MSE is computed per record over the post segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub stream_index: u64,
    pub sim_time_s: f64,
    pub statistic: f64,
    pub p_value: f64,
    /// Version serving after the retrain this event triggered; None when
    /// the event was suppressed.
    pub retrained_to: Option<u64>,
    pub pre_mean_db_sync: Option<f64>,
    pub post_mean_db_sync: Option<f64>,
    pub pre_mean_db_frozen: Option<f64>,
    pub post_mean_db_frozen: Option<f64>,
    pub post_mse_sync: f64,
    pub post_mse_frozen: Option<f64>,
    /// Linear-MSE improvement of the synchronized model over the frozen one
    /// across the post segment, percent.
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub topology: String,
    pub sync: bool,
    pub compare: bool,
    pub warmup_records: usize,
    pub records: usize,
    /// Flows dropped from the stream because no packet was delivered.
    pub excluded_flows: usize,
    pub overall_nmse_db_sync: f64,
    pub overall_nmse_db_frozen: Option<f64>,
    pub drifts: Vec<DriftSummary>,
    pub retrains: u64,
    pub suppressed: u64,
    pub final_version: u64,
    pub sla_sync: SlaTotals,
    pub sla_frozen: Option<SlaTotals>,
}

/// Everything a caller might want to assert on, plus the directory the
/// artifacts went to.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub labels: Vec<f64>,
    pub predictions_sync: Vec<f64>,
    pub predictions_frozen: Option<Vec<f64>>,
    pub nmse_sync: Vec<NmseWindow>,
    pub nmse_frozen: Option<Vec<NmseWindow>>,
    pub sla_sync: ViolationReport,
    pub sla_frozen: Option<ViolationReport>,
    /// Per-record average traffic rate, the detector's input stream.
    pub rates: Vec<f64>,
    pub detections: Vec<DriftEvent>,
    pub train_log: Vec<TrainLogRow>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub version: u64,
    pub records: usize,
    pub train_examples: usize,
    pub val_examples: usize,
    pub epochs: usize,
    pub final_train_mape: f64,
    pub final_val_mape: Option<f64>,
}

/// Generate and label the whole operational horizon for `seed`. Labels come
/// from one whole-horizon simulation up front; the streaming loop replays
/// them in start order. The simulator is the ground-truth oracle either
/// way, and eager labeling keeps the run single-pass.
pub fn build_stream(
    g: &TopologyGraph,
    sched: &ScenarioSchedule,
    flows_per_second: f64,
    seed: u64,
) -> Result<LabeledSet, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_OP_FLOWS));
    let flows = generate_flows(g, sched, flows_per_second, &mut rng)?;
    Ok(label_dataset(g, &flows, derive_seed(seed, TAG_OP_SIM))?)
}

/// The detector's input stream for an already-labeled record sequence.
pub fn rate_stream(records: &[LabeledRecord]) -> Vec<f64> {
    records.iter().map(|r| r.flow.avg_traffic_rate_bps).collect()
}

fn retrain_snapshot<'a>(
    source: RetrainSource,
    sched: &ScenarioSchedule,
    seen: &'a [LabeledRecord],
    at_s: f64,
) -> &'a [LabeledRecord] {
    match source {
        RetrainSource::Cumulative => seen,
        RetrainSource::Phase => {
            let start = sched.phase_start_s(sched.phase_at(at_s));
            let from = seen.partition_point(|r| r.start_s < start);
            &seen[from..]
        }
    }
}

fn mean_db_in(windows: &[NmseWindow], lo: usize, hi: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for w in windows {
        if w.start >= lo && w.start < hi {
            sum += w.value_db;
            n += 1;
        }
    }
    if n == 0 {
        None
    } else {
        Some(sum / n as f64)
    }
}

/// Segment bounds for one detection: the schedule phase before the one the
/// detection landed in (pre) and detection to the end of its own phase
/// (post). `boundaries` holds ascending record indices of phase starts,
/// beginning with 0.
fn regime_segments(
    boundaries: &[usize],
    det: usize,
    n: usize,
) -> ((usize, usize), (usize, usize)) {
    let k = boundaries.partition_point(|&b| b <= det);
    let regime_start = boundaries[k - 1];
    let pre_start = if k >= 2 { boundaries[k - 2] } else { regime_start };
    let post_end = boundaries.get(k).copied().unwrap_or(n);
    ((pre_start, regime_start), (det, post_end))
}

fn mse_in(labels: &[f64], preds: &[f64], lo: usize, hi: usize) -> f64 {
    let hi = hi.min(labels.len());
    if lo >= hi {
        return f64::NAN;
    }
    let mut sum = 0.0;
    for t in lo..hi {
        let e = labels[t] - preds[t];
        sum += e * e;
    }
    sum / (hi - lo) as f64
}

pub fn run_scenario(cfg: &RunConfig) -> Result<RunOutput, ScenarioError> {
    let g = TopologyGraph::load(&cfg.topology)?;
    let sched = cfg.schedule.load()?;
    fs::create_dir_all(&cfg.out_dir)?;

    // warmup: traffic with the first phase's statistics trains the first
    // deployed model
    let warmup_sched = ScenarioSchedule {
        phases: vec![PhaseSpec { duration_s: cfg.warmup_s, ..sched.phases[0] }],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_WARMUP_FLOWS));
    let warmup_flows = generate_flows(&g, &warmup_sched, cfg.flows_per_second, &mut rng)?;
    let warmup = label_dataset(&g, &warmup_flows, derive_seed(cfg.seed, TAG_WARMUP_SIM))?;
    let base = init_weights(cfg.seed, ModelDims::default())?;
    let warm_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, TAG_WARMUP_TRAIN),
        ..cfg.train
    };
    let (v1, warmup_report) = train(&base, &warmup.records, &warm_cfg)?;
    let warm_steps = planned_steps(warmup.records.len(), &warm_cfg);

    let mut train_log = vec![TrainLogRow {
        version: v1.version,
        records: warmup.records.len(),
        train_examples: warmup_report.train_examples,
        val_examples: warmup_report.val_examples,
        epochs: warm_cfg.epochs,
        final_train_mape: *warmup_report.train_mape.last().unwrap_or(&f64::NAN),
        final_val_mape: warmup_report.val_mape.last().copied(),
    }];

    // stores and the deployment plumbing
    let traffic_store: LineStore<TrafficRecord> =
        LineStore::create(cfg.out_dir.join("traffic.jsonl"), TRAFFIC_SCHEMA)?;
    let labeled_store: LineStore<LabeledRecord> =
        LineStore::create(cfg.out_dir.join("labeled.jsonl"), LABELED_SCHEMA)?;
    let wstore = WeightsStore::create(cfg.out_dir.join("weights"))?;
    wstore.save(&v1, 0.0)?;
    let frozen = Arc::new(v1.clone());
    let deployed = DeployedModel::new(v1);
    let manager = SyncManager::new(deployed, 0.0);

    let mut detector = if cfg.sync {
        Some(KswinDetector::new(KswinConfig {
            seed: derive_seed(cfg.seed, TAG_DETECTOR),
            ..cfg.kswin
        })?)
    } else {
        None
    };

    // the operational stream, labeled eagerly, replayed in start order
    let stream = build_stream(&g, &sched, cfg.flows_per_second, cfg.seed)?;
    let records = &stream.records;
    if records.is_empty() {
        return Err(ScenarioError::EmptyStream);
    }

    let n = records.len();
    let mut labels = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    let mut pred_sync = Vec::with_capacity(n);
    let mut pred_frozen = cfg.compare.then(|| Vec::with_capacity(n));
    let mut detections: Vec<DriftEvent> = Vec::new();
    let mut retrained_to: Vec<Option<u64>> = Vec::new();

    for t in 0..n {
        let rec = &records[t];
        let graph = micro_graph(rec);
        let current = manager.deployed().get();
        pred_sync.push(predict_delay(&graph, &current)?[0]);
        if let Some(pf) = &mut pred_frozen {
            pf.push(predict_delay(&graph, &frozen)?[0]);
        }
        labels.push(rec.y);
        rates.push(rec.flow.avg_traffic_rate_bps);
        traffic_store.append(&TrafficRecord::from(rec))?;
        labeled_store.append(rec)?;

        let Some(det) = &mut detector else { continue };
        let Some(event) = det.update(rec.flow.avg_traffic_rate_bps) else {
            continue;
        };
        let mut version = None;
        if let Some(ticket) = manager.on_drift(event, rec.start_s) {
            let snapshot =
                retrain_snapshot(cfg.retrain_source, &sched, &records[..=t], rec.start_s);
            // A drift-era snapshot is a fraction of the warmup set, so a
            // flat epoch count would give the retrain a fraction of the
            // optimizer steps the first fit had. Stretch epochs until the
            // step counts match.
            let mut retrain_cfg = TrainConfig {
                seed: derive_seed(cfg.seed, TAG_RETRAIN_BASE | (ticket.base_version + 1)),
                ..cfg.train
            };
            let per_epoch =
                planned_steps(snapshot.len(), &TrainConfig { epochs: 1, ..retrain_cfg });
            if per_epoch > 0 {
                retrain_cfg.epochs = retrain_cfg.epochs.max(warm_steps.div_ceil(per_epoch));
            }
            let (new_w, report) = train(&current, snapshot, &retrain_cfg)?;
            let v = manager.complete_retrain(&ticket, &new_w, &wstore, rec.start_s)?;
            train_log.push(TrainLogRow {
                version: v,
                records: snapshot.len(),
                train_examples: report.train_examples,
                val_examples: report.val_examples,
                epochs: retrain_cfg.epochs,
                final_train_mape: *report.train_mape.last().unwrap_or(&f64::NAN),
                final_val_mape: report.val_mape.last().copied(),
            });
            version = Some(v);
        }
        detections.push(event);
        retrained_to.push(version);
    }

    // scoring
    let nmse_sync = windowed_nmse(&labels, &pred_sync, NMSE_WINDOW)?;
    let nmse_frozen = match &pred_frozen {
        Some(p) => Some(windowed_nmse(&labels, p, NMSE_WINDOW)?),
        None => None,
    };
    let pdbs: Vec<f64> = records
        .iter()
        .map(|r| cfg.sla.pdb(r.flow.path_prop_delay_s))
        .collect();
    let sla_sync = classify_and_report(&labels, &pred_sync, &pdbs, NMSE_WINDOW)?;
    let sla_frozen = match &pred_frozen {
        Some(p) => Some(classify_and_report(&labels, p, &pdbs, NMSE_WINDOW)?),
        None => None,
    };

    // per-drift segments, scored against the schedule's regimes
    let mut boundaries: Vec<usize> = vec![0];
    for p in 1..sched.phases.len() {
        let start = sched.phase_start_s(p);
        boundaries.push(records.partition_point(|r| r.start_s < start));
    }
    let mut drifts = Vec::with_capacity(detections.len());
    for (i, event) in detections.iter().enumerate() {
        let d = event.sample_index as usize;
        let ((pre_lo, pre_hi), (post_lo, post_hi)) = regime_segments(&boundaries, d, n);
        let post_mse_sync = mse_in(&labels, &pred_sync, post_lo, post_hi);
        let post_mse_frozen =
            pred_frozen.as_ref().map(|p| mse_in(&labels, p, post_lo, post_hi));
        drifts.push(DriftSummary {
            stream_index: event.sample_index,
            sim_time_s: records[d].start_s,
            statistic: event.statistic,
            p_value: event.p_value,
            retrained_to: retrained_to[i],
            pre_mean_db_sync: mean_db_in(&nmse_sync, pre_lo, pre_hi),
            post_mean_db_sync: mean_db_in(&nmse_sync, post_lo, post_hi),
            pre_mean_db_frozen: nmse_frozen
                .as_ref()
                .and_then(|s| mean_db_in(s, pre_lo, pre_hi)),
            post_mean_db_frozen: nmse_frozen
                .as_ref()
                .and_then(|s| mean_db_in(s, post_lo, post_hi)),
            post_mse_sync,
            post_mse_frozen,
            improvement_pct: post_mse_frozen
                .map(|mf| 100.0 * (1.0 - post_mse_sync / mf)),
        });
    }

    let summary = RunSummary {
        seed: cfg.seed,
        topology: g.name.clone(),
        sync: cfg.sync,
        compare: cfg.compare,
        warmup_records: warmup.records.len(),
        records: n,
        excluded_flows: stream.excluded.len() + warmup.excluded.len(),
        overall_nmse_db_sync: nmse_db(&labels, &pred_sync)?,
        overall_nmse_db_frozen: match &pred_frozen {
            Some(p) => Some(nmse_db(&labels, p)?),
            None => None,
        },
        drifts,
        retrains: retrained_to.iter().filter(|v| v.is_some()).count() as u64,
        suppressed: manager.suppressed(),
        final_version: manager.deployed().version(),
        sla_sync: SlaTotals::from(&sla_sync),
        sla_frozen: sla_frozen.as_ref().map(SlaTotals::from),
    };

    write_artifacts(
        cfg,
        &summary,
        &nmse_sync,
        nmse_frozen.as_deref(),
        &detections,
        &retrained_to,
        &train_log,
        &manager,
    )?;

    Ok(RunOutput {
        summary,
        labels,
        predictions_sync: pred_sync,
        predictions_frozen: pred_frozen,
        nmse_sync,
        nmse_frozen,
        sla_sync,
        sla_frozen,
        rates,
        detections,
        train_log,
        out_dir: cfg.out_dir.clone(),
    })
}

#[allow(clippy::too_many_arguments)]
fn write_artifacts(
    cfg: &RunConfig,
    summary: &RunSummary,
    nmse_sync: &[NmseWindow],
    nmse_frozen: Option<&[NmseWindow]>,
    detections: &[DriftEvent],
    retrained_to: &[Option<u64>],
    train_log: &[TrainLogRow],
    manager: &SyncManager,
) -> Result<(), ScenarioError> {
    let out = &cfg.out_dir;

    fs::write(out.join("nmse_sync.csv"), nmse_csv(nmse_sync))?;
    if let Some(series) = nmse_frozen {
        fs::write(out.join("nmse_frozen.csv"), nmse_csv(series))?;
    }

    let mut drifts_csv = String::from("stream_index,sim_time_s,statistic,p_value,retrained_to\n");
    for (i, e) in detections.iter().enumerate() {
        let v = retrained_to[i].map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            drifts_csv,
            "{},{},{},{},{}",
            e.sample_index,
            summary.drifts[i].sim_time_s,
            e.statistic,
            e.p_value,
            v
        )
        .unwrap();
    }
    fs::write(out.join("drifts.csv"), drifts_csv)?;

    let mut train_csv = String::from(
        "version,records,train_examples,val_examples,epochs,final_train_mape,final_val_mape\n",
    );
    for row in train_log {
        writeln!(
            train_csv,
            "{},{},{},{},{},{},{}",
            row.version,
            row.records,
            row.train_examples,
            row.val_examples,
            row.epochs,
            row.final_train_mape,
            row.final_val_mape.map(|v| v.to_string()).unwrap_or_default()
        )
        .unwrap();
    }
    fs::write(out.join("train_log.csv"), train_csv)?;

    let mut control = String::new();
    for entry in manager.control_log() {
        control.push_str(&serde_json::to_string(&entry)?);
        control.push('\n');
    }
    fs::write(out.join("control_log.jsonl"), control)?;

    fs::write(out.join("sla_report.txt"), sla_report_text(cfg, summary))?;

    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    fs::write(out.join("summary.json"), json)?;
    Ok(())
}

fn nmse_csv(series: &[NmseWindow]) -> String {
    let mut s = String::from("window_start,len,partial,value_db\n");
    for w in series {
        writeln!(s, "{},{},{},{}", w.start, w.len, w.partial, w.value_db).unwrap();
    }
    s
}

fn sla_report_text(cfg: &RunConfig, summary: &RunSummary) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "SLA verdicts over {} flows (budget = max({} s, {} x path propagation delay))",
        summary.records, cfg.sla.floor_s, cfg.sla.beta
    )
    .unwrap();
    writeln!(s, "actual violations: {}", summary.sla_sync.actual_violations).unwrap();
    writeln!(
        s,
        "synchronized model: predicted {}, misclassified {}",
        summary.sla_sync.predicted_violations, summary.sla_sync.misclassified
    )
    .unwrap();
    if let Some(f) = &summary.sla_frozen {
        writeln!(
            s,
            "frozen model: predicted {}, misclassified {}",
            f.predicted_violations, f.misclassified
        )
        .unwrap();
    }
    writeln!(s, "retrains: {}", summary.retrains).unwrap();
    s
}

// ---------------------------------------------------------------------------
// Window sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub window_size: usize,
    pub detections: u64,
}

/// One full detector pass per window size over an already-recorded sample
/// stream; no re-simulation. `stat_size`, `alpha`, and the seed come from
/// `base`, and the comparison cadence tracks each window at half its size.
pub fn window_sweep(
    samples: &[f64],
    base: &KswinConfig,
    windows: &[usize],
) -> Result<Vec<SweepRow>, DriftError> {
    let mut rows = Vec::with_capacity(windows.len());
    for &w in windows {
        let cfg = KswinConfig {
            window_size: w,
            check_interval: (w / 2).max(1),
            ..*base
        };
        let mut det = KswinDetector::new(cfg)?;
        let mut count = 0u64;
        for &x in samples {
            if det.update(x).is_some() {
                count += 1;
            }
        }
        rows.push(SweepRow { window_size: w, detections: count });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("window_size,detections\n");
    for r in rows {
        writeln!(s, "{},{}", r.window_size, r.detections).unwrap();
    }
    s
}
