//! Evaluation quantities computed from experiment logs.
//!
//! Ground truth: a robot is in a faulty state at a tick when any degradation
//! coefficient is at or below 0.75. Detection state is read per tick from
//! the latched flags, either embedded in an online log or reconstructed by
//! an offline replay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DetectionTimeline, ReplayDetection, GROUND_TRUTH_D0};
use crate::log::{ControllerMode, ExperimentLog};
use crate::matching::HardwareClass;
use crate::repertoire::DiagnosisCategory;

/// Detection quality for one robot over one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotMetrics {
    /// Time detected while faulty over total faulty time; absent when the
    /// robot was never faulty.
    pub psi_t: Option<f64>,
    /// Time detected while healthy over total healthy time; absent when the
    /// robot was never healthy.
    pub psi_f: Option<f64>,
    /// Smallest relevant coefficient at each detection crossing.
    pub deltas: Vec<f64>,
    /// Crossings that began while the robot was faulty.
    pub tp_crossings: u32,
    /// Crossings that began while the robot was healthy.
    pub fp_crossings: u32,
}

/// Detection and foraging quantities for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub per_robot: Vec<RobotMetrics>,
    pub resources: u64,
    pub lost: u32,
    pub power_consumed: f64,
}

/// Per-tick faulty state of one robot.
pub fn faulty_timeline(log: &ExperimentLog, robot: usize) -> Vec<bool> {
    (1..=log.n_ticks)
        .map(|t| {
            let rec = log.record(t, robot);
            rec.d_left.min(rec.d_right).min(rec.d_sensor) <= GROUND_TRUTH_D0
        })
        .collect()
}

/// Per-tick detected state of one robot from the flags embedded in the log.
pub fn detected_timeline_from_log(log: &ExperimentLog, robot: usize) -> Vec<bool> {
    (1..=log.n_ticks)
        .map(|t| {
            let rec = log.record(t, robot);
            rec.detected_motor || rec.detected_sensor
        })
        .collect()
}

/// True and false detection-time proportions from per-tick states.
pub fn compute_psi(faulty: &[bool], detected: &[bool]) -> (Option<f64>, Option<f64>) {
    assert_eq!(faulty.len(), detected.len());
    let mut faulty_ticks = 0u64;
    let mut healthy_ticks = 0u64;
    let mut tp_ticks = 0u64;
    let mut fp_ticks = 0u64;
    for (&f, &d) in faulty.iter().zip(detected) {
        if f {
            faulty_ticks += 1;
            if d {
                tp_ticks += 1;
            }
        } else {
            healthy_ticks += 1;
            if d {
                fp_ticks += 1;
            }
        }
    }
    let psi_t = (faulty_ticks > 0).then(|| tp_ticks as f64 / faulty_ticks as f64);
    let psi_f = (healthy_ticks > 0).then(|| fp_ticks as f64 / healthy_ticks as f64);
    (psi_t, psi_f)
}

/// Rising edges of the detected state, classified by the faulty state at
/// the crossing tick. Returns (true positives, false positives, tick
/// indices of crossings, 0-based).
pub fn detection_crossings(faulty: &[bool], detected: &[bool]) -> (u32, u32, Vec<usize>) {
    let mut tp = 0;
    let mut fp = 0;
    let mut ticks = Vec::new();
    let mut prev = false;
    for (i, &d) in detected.iter().enumerate() {
        if d && !prev {
            ticks.push(i);
            if faulty[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        prev = d;
    }
    (tp, fp, ticks)
}

fn delta_at(log: &ExperimentLog, tick: u64, robot: usize, class: Option<HardwareClass>) -> f64 {
    let rec = log.record(tick, robot);
    match class {
        Some(HardwareClass::Motor) => rec.d_left.min(rec.d_right),
        Some(HardwareClass::Sensor) => rec.d_sensor,
        None => rec.d_left.min(rec.d_right).min(rec.d_sensor),
    }
}

/// Smallest relevant coefficient at a detection instant, read from the log.
pub fn compute_delta(log: &ExperimentLog, tick: u64, robot: usize, class: HardwareClass) -> f64 {
    delta_at(log, tick, robot, Some(class))
}

fn robot_metrics(
    log: &ExperimentLog,
    robot: usize,
    detected: &[bool],
    deltas: Vec<f64>,
) -> RobotMetrics {
    let faulty = faulty_timeline(log, robot);
    let (psi_t, psi_f) = compute_psi(&faulty, detected);
    let (tp, fp, _) = detection_crossings(&faulty, detected);
    RobotMetrics { psi_t, psi_f, deltas, tp_crossings: tp, fp_crossings: fp }
}

/// Metrics for an online run whose log embeds the latched detection flags.
pub fn run_metrics_from_log(log: &ExperimentLog, resources: u64, power_consumed: f64) -> RunMetrics {
    let mut per_robot = Vec::with_capacity(log.n_robots);
    for r in 0..log.n_robots {
        let detected = detected_timeline_from_log(log, r);
        let faulty = faulty_timeline(log, r);
        let (_, _, crossing_ticks) = detection_crossings(&faulty, &detected);
        let deltas = crossing_ticks
            .iter()
            .map(|&i| delta_at(log, i as u64 + 1, r, crossing_class(log, i as u64 + 1, r)))
            .collect();
        per_robot.push(robot_metrics(log, r, &detected, deltas));
    }
    RunMetrics { per_robot, resources, lost: count_lost(log), power_consumed }
}

fn crossing_class(log: &ExperimentLog, tick: u64, robot: usize) -> Option<HardwareClass> {
    let rec = log.record(tick, robot);
    match (rec.detected_motor, rec.detected_sensor) {
        (true, false) => Some(HardwareClass::Motor),
        (false, true) => Some(HardwareClass::Sensor),
        _ => None,
    }
}

/// Metrics for an offline replay over a recorded log.
pub fn run_metrics_from_replay(
    log: &ExperimentLog,
    timeline: &DetectionTimeline,
    detections: &[ReplayDetection],
) -> RunMetrics {
    let mut per_robot = Vec::with_capacity(log.n_robots);
    for r in 0..log.n_robots {
        let detected: Vec<bool> = (1..=log.n_ticks).map(|t| timeline.any(t, r)).collect();
        let deltas = detections
            .iter()
            .filter(|d| d.robot as usize == r)
            .map(|d| d.delta)
            .collect();
        per_robot.push(robot_metrics(log, r, &detected, deltas));
    }
    RunMetrics { per_robot, resources: 0, lost: count_lost(log), power_consumed: 0.0 }
}

fn count_lost(log: &ExperimentLog) -> u32 {
    (0..log.n_robots)
        .filter(|&r| log.record(log.n_ticks, r).mode == ControllerMode::Lost)
        .count() as u32
}

/// Confusion counts over diagnosis categories, truth against prediction.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DiagnosisConfusion {
    counts: BTreeMap<String, u32>,
}

impl DiagnosisConfusion {
    pub fn add(&mut self, truth: DiagnosisCategory, predicted: DiagnosisCategory) {
        *self.counts.entry(format!("{truth}->{predicted}")).or_insert(0) += 1;
    }

    pub fn count(&self, truth: DiagnosisCategory, predicted: DiagnosisCategory) -> u32 {
        self.counts.get(&format!("{truth}->{predicted}")).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    /// Proportion of correct diagnoses, excluding detections whose ground
    /// truth is a false positive (no fault to diagnose).
    pub fn correct_rate_excluding_false_positives(&self) -> Option<f64> {
        let mut correct = 0u32;
        let mut considered = 0u32;
        for (key, &count) in &self.counts {
            let (truth, predicted) = key.split_once("->").expect("key format");
            if truth == "false_positive" {
                continue;
            }
            considered += count;
            if truth == predicted {
                correct += count;
            }
        }
        (considered > 0).then(|| correct as f64 / considered as f64)
    }
}

/// Build a confusion matrix from (truth, prediction) pairs.
pub fn diagnosis_confusion(
    pairs: impl IntoIterator<Item = (DiagnosisCategory, DiagnosisCategory)>,
) -> DiagnosisConfusion {
    let mut c = DiagnosisConfusion::default();
    for (truth, predicted) in pairs {
        c.add(truth, predicted);
    }
    c
}

/// Lower median: for even counts, the lower of the two central values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    Some(sorted[(sorted.len() - 1) / 2])
}

/// Test-over-baseline resource percentage.
pub fn foraging_percentage(test_resources: f64, baseline_resources: f64) -> f64 {
    if baseline_resources == 0.0 {
        return if test_resources == 0.0 { 100.0 } else { f64::INFINITY };
    }
    100.0 * test_resources / baseline_resources
}

/// One flat row per replicate for the report CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub replicate: u32,
    pub seed: u64,
    pub resources: u64,
    pub lost: u32,
    pub power_consumed: f64,
    /// Median over robots that were ever faulty.
    pub psi_t_median: Option<f64>,
    /// Median over robots that were ever healthy.
    pub psi_f_median: Option<f64>,
    pub delta_median: Option<f64>,
    pub tp_crossings: u32,
    pub fp_crossings: u32,
}

impl MetricsRow {
    pub fn from_metrics(replicate: u32, seed: u64, m: &RunMetrics) -> Self {
        let psi_t: Vec<f64> = m.per_robot.iter().filter_map(|r| r.psi_t).collect();
        let psi_f: Vec<f64> = m.per_robot.iter().filter_map(|r| r.psi_f).collect();
        let deltas: Vec<f64> = m.per_robot.iter().flat_map(|r| r.deltas.iter().copied()).collect();
        MetricsRow {
            replicate,
            seed,
            resources: m.resources,
            lost: m.lost,
            power_consumed: m.power_consumed,
            psi_t_median: lower_median(&psi_t),
            psi_f_median: lower_median(&psi_f),
            delta_median: lower_median(&deltas),
            tp_crossings: m.per_robot.iter().map(|r| r.tp_crossings).sum(),
            fp_crossings: m.per_robot.iter().map(|r| r.fp_crossings).sum(),
        }
    }

    pub const CSV_HEADER: &'static str = "replicate,seed,resources,lost,power_consumed,psi_t_median,psi_f_median,delta_median,tp_crossings,fp_crossings";

    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.replicate,
            self.seed,
            self.resources,
            self.lost,
            self.power_consumed,
            opt(self.psi_t_median),
            opt(self.psi_f_median),
            opt(self.delta_median),
            self.tp_crossings,
            self.fp_crossings
        )
    }
}

/// Medians across replicates for the aggregate report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub replicates: usize,
    pub resources_median: Option<f64>,
    pub lost_total: u32,
    pub power_consumed_median: Option<f64>,
    pub psi_t_median: Option<f64>,
    pub psi_f_median: Option<f64>,
    pub delta_median: Option<f64>,
    pub fp_crossings_median: Option<f64>,
}

impl AggregateMetrics {
    pub fn from_rows(rows: &[MetricsRow]) -> Self {
        let med = |f: &dyn Fn(&MetricsRow) -> Option<f64>| {
            let values: Vec<f64> = rows.iter().filter_map(f).collect();
            lower_median(&values)
        };
        AggregateMetrics {
            replicates: rows.len(),
            resources_median: med(&|r| Some(r.resources as f64)),
            lost_total: rows.iter().map(|r| r.lost).sum(),
            power_consumed_median: med(&|r| Some(r.power_consumed)),
            psi_t_median: med(&|r| r.psi_t_median),
            psi_f_median: med(&|r| r.psi_f_median),
            delta_median: med(&|r| r.delta_median),
            fp_crossings_median: med(&|r| Some(r.fp_crossings as f64)),
        }
    }
}
