//! Antibody population dynamics: the detection engine proper.
//!
//! Each robot owns a repertoire X of antibody populations per hardware
//! class. Once every 50 s (a full behavioural window), every population
//! level is updated:
//!
//! ```text
//! xdot = m(p, W_self) * (1 + k1 * max m(p, Y)) - k2_hat * sum_j m(p, W_j) - k3
//! ```
//!
//! Populations are stimulated by matching the robot's own recent behaviour,
//! further stimulated by matching known-faulty paratopes in the shared
//! repertoire Y, and suppressed by matching the behaviour of the other
//! robots. A population whose level drops below zero is removed; one whose
//! level exceeds the fault threshold F marks its robot as detected for that
//! hardware class until the next cycle.
//!
//! The suppression coefficient is rescaled by swarm size so the total
//! suppression budget `k2_hat * (N - 1)` is invariant: `k2_hat = k2 * 9 / (N - 1)`.

use crate::error::{Error, Result};
use crate::log::{ControllerMode, ExperimentLog};
use crate::matching::{best_match, match_specificity, HardwareClass, MatchParams, Paratope};
use crate::repertoire::{
    BehaviouralWindow, DiagnosisCategory, LabeledParatope, LabeledRepertoire,
    PopulationRepertoire, PARATOPE_LEN, WINDOW_CAPACITY,
};

/// Degradation level at or below which a coefficient counts as faulty, both
/// for ground-truth labelling and for the evaluation metrics.
pub const GROUND_TRUTH_D0: f64 = 0.75;

/// Ticks between population updates (50 s at 6 Hz).
pub const CYCLE_TICKS: u64 = WINDOW_CAPACITY as u64;
/// Ticks between paratope extractions (5 s at 6 Hz).
pub const EXTRACT_TICKS: u64 = PARATOPE_LEN as u64;

/// Tuning coefficients and matching parameters for one hardware class.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsCoeffs {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Detection threshold F.
    pub fault_threshold: f64,
    /// Parameters for matching a paratope against behavioural windows.
    pub window_match: MatchParams,
    /// Parameters for matching a paratope against labelled entries in Y.
    pub antigen_match: MatchParams,
}

impl DynamicsCoeffs {
    pub fn motor_default() -> Self {
        DynamicsCoeffs {
            k1: 0.24,
            k2: 0.3,
            k3: 1.2,
            fault_threshold: 1.0,
            window_match: MatchParams::motor_window(),
            antigen_match: MatchParams::motor_antigen(),
        }
    }

    pub fn sensor_default() -> Self {
        DynamicsCoeffs {
            k1: 0.18,
            k2: 0.3,
            k3: 1.2,
            fault_threshold: 1.0,
            window_match: MatchParams::sensor_window(),
            antigen_match: MatchParams::sensor_antigen(),
        }
    }

    pub fn for_class(class: HardwareClass) -> Self {
        match class {
            HardwareClass::Motor => Self::motor_default(),
            HardwareClass::Sensor => Self::sensor_default(),
        }
    }
}

/// Rescale the suppression coefficient for swarm size `n` so that
/// `k2_hat * (n - 1)` stays equal to `9 * k2`.
pub fn scale_k2(k2: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "suppression needs at least one neighbour, got swarm size {n}"
        )));
    }
    Ok(k2 * 9.0 / (n - 1) as f64)
}

/// One population update. Returns the level change, not the new level.
pub fn population_step(
    paratope: &Paratope,
    w_self: &Paratope,
    neighbour_windows: &[&Paratope],
    y: &LabeledRepertoire,
    coeffs: &DynamicsCoeffs,
    k2_hat: f64,
) -> Result<f64> {
    let m_self = match_specificity(paratope, w_self, &coeffs.window_match)?;
    let (max_y, _) = best_match(paratope, y.paratopes(), &coeffs.antigen_match)?;
    let mut suppression = 0.0;
    for w in neighbour_windows {
        suppression += match_specificity(paratope, w, &coeffs.window_match)?;
    }
    Ok(m_self * (1.0 + coeffs.k1 * max_y) - k2_hat * suppression - coeffs.k3)
}

/// Subclass diagnosis: the best-matching labelled paratope (with m > 0)
/// provides the category; otherwise the fault stays undiagnosed.
pub fn diagnose(
    paratope: &Paratope,
    y: &LabeledRepertoire,
    params: &MatchParams,
) -> Result<Option<(f64, DiagnosisCategory)>> {
    let (m, idx) = best_match(paratope, y.paratopes(), params)?;
    match idx {
        Some(i) if m > 0.0 => Ok(Some((m, y.entries[i].category))),
        _ => Ok(None),
    }
}

/// Ground-truth category of a detection, read off the degradation
/// coefficients at the detection instant.
pub fn ground_truth_category(
    class: HardwareClass,
    d_left: f64,
    d_right: f64,
) -> DiagnosisCategory {
    match class {
        HardwareClass::Sensor => DiagnosisCategory::SensorFault,
        HardwareClass::Motor => match (d_left <= GROUND_TRUTH_D0, d_right <= GROUND_TRUTH_D0) {
            (true, true) => DiagnosisCategory::BothMotors,
            (true, false) => DiagnosisCategory::LeftMotor,
            (false, true) => DiagnosisCategory::RightMotor,
            (false, false) => DiagnosisCategory::FalsePositive,
        },
    }
}

/// A robot-level detection: some population crossed the fault threshold at
/// this cycle where none was above it before.
#[derive(Debug, Clone)]
pub struct Detection {
    pub robot: u32,
    pub class: HardwareClass,
    pub time: f64,
    /// Highest population level among flagged populations.
    pub level: f64,
    /// Best matching specificity against Y and the resulting category, when
    /// any labelled paratope matches at all.
    pub diagnosis: Option<(f64, DiagnosisCategory)>,
}

/// A population above threshold at a cycle; the raw material for building
/// the next-order labelled repertoire.
#[derive(Debug, Clone)]
pub struct FlaggedParatope {
    pub robot: u32,
    pub class: HardwareClass,
    pub time: f64,
    pub level: f64,
    pub paratope: Paratope,
}

/// Outcome of one swarm-wide cycle.
#[derive(Debug, Clone, Default)]
pub struct CycleReport {
    pub detections: Vec<Detection>,
    pub flagged: Vec<FlaggedParatope>,
    pub removed: usize,
}

/// Configuration of a model instance.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub n_robots: usize,
    pub motor: DynamicsCoeffs,
    pub sensor: DynamicsCoeffs,
    /// Under local-positioning foraging the motor-class model only computes
    /// for a robot when it and at least four other robots are moving.
    pub motor_moving_gate: bool,
}

impl ModelConfig {
    pub fn new(n_robots: usize, motor_moving_gate: bool) -> Self {
        ModelConfig {
            n_robots,
            motor: DynamicsCoeffs::motor_default(),
            sensor: DynamicsCoeffs::sensor_default(),
            motor_moving_gate,
        }
    }
}

struct RobotMonitor {
    w_motor: BehaviouralWindow,
    w_sensor: BehaviouralWindow,
    x_motor: PopulationRepertoire,
    x_sensor: PopulationRepertoire,
}

/// The detection engine for one swarm: per-robot windows and repertoires,
/// the shared labelled repertoires, and the latched detection state.
///
/// The engine is fed one normalised sample per robot per tick and cycled at
/// 50 s boundaries; it is oblivious to whether the samples come from a live
/// simulation or a recorded log.
pub struct AapdModel {
    cfg: ModelConfig,
    k2_hat_motor: f64,
    k2_hat_sensor: f64,
    y_motor: LabeledRepertoire,
    y_sensor: LabeledRepertoire,
    robots: Vec<RobotMonitor>,
    /// Latched per-robot detection state, [motor, sensor].
    flagged: Vec<[bool; 2]>,
}

impl AapdModel {
    pub fn new(cfg: ModelConfig, y_motor: LabeledRepertoire, y_sensor: LabeledRepertoire) -> Result<Self> {
        if y_motor.class() != HardwareClass::Motor || y_sensor.class() != HardwareClass::Sensor {
            return Err(Error::Domain("labelled repertoires passed in the wrong order".into()));
        }
        let k2_hat_motor = scale_k2(cfg.motor.k2, cfg.n_robots)?;
        let k2_hat_sensor = scale_k2(cfg.sensor.k2, cfg.n_robots)?;
        let robots = (0..cfg.n_robots)
            .map(|_| RobotMonitor {
                w_motor: BehaviouralWindow::new(HardwareClass::Motor),
                w_sensor: BehaviouralWindow::new(HardwareClass::Sensor),
                x_motor: PopulationRepertoire::new(HardwareClass::Motor),
                x_sensor: PopulationRepertoire::new(HardwareClass::Sensor),
            })
            .collect();
        let flagged = vec![[false; 2]; cfg.n_robots];
        Ok(AapdModel { cfg, k2_hat_motor, k2_hat_sensor, y_motor, y_sensor, robots, flagged })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Latched detection flags for a robot: [motor, sensor].
    pub fn detected(&self, robot: usize) -> [bool; 2] {
        self.flagged[robot]
    }

    /// Feed one tick of normalised telemetry for a robot.
    pub fn push_sample(&mut self, robot: usize, motor: [f64; 3], gamma: f64) -> Result<()> {
        let mon = &mut self.robots[robot];
        mon.w_motor.push_sample(&motor)?;
        mon.w_sensor.push_sample(&[gamma])?;
        Ok(())
    }

    /// Extract a candidate paratope per class for every active robot and
    /// offer it to the robot's repertoire. Called every 5 s.
    pub fn extract(&mut self, active: &[bool], time: f64) -> Result<()> {
        for (r, mon) in self.robots.iter_mut().enumerate() {
            if !active[r] {
                continue;
            }
            if let Some(p) = mon.w_motor.extract_paratope() {
                mon.x_motor.try_add(p, time)?;
            }
            if let Some(p) = mon.w_sensor.extract_paratope() {
                mon.x_sensor.try_add(p, time)?;
            }
        }
        Ok(())
    }

    /// Run one swarm-wide population update against a frozen snapshot of all
    /// windows. `moving` and `active` are per-robot masks for this tick.
    pub fn cycle(&mut self, time: f64, moving: &[bool], active: &[bool]) -> Result<CycleReport> {
        let mut report = CycleReport::default();

        // Frozen snapshots: every robot's update reads the same windows.
        let motor_windows: Vec<Option<Paratope>> = self
            .robots
            .iter()
            .enumerate()
            .map(|(r, mon)| (active[r] && mon.w_motor.is_full()).then(|| mon.w_motor.snapshot()))
            .collect();
        let sensor_windows: Vec<Option<Paratope>> = self
            .robots
            .iter()
            .enumerate()
            .map(|(r, mon)| (active[r] && mon.w_sensor.is_full()).then(|| mon.w_sensor.snapshot()))
            .collect();

        let moving_count = (0..self.cfg.n_robots).filter(|&r| active[r] && moving[r]).count();

        for r in 0..self.cfg.n_robots {
            if !active[r] {
                continue;
            }
            for class in [HardwareClass::Motor, HardwareClass::Sensor] {
                let windows = match class {
                    HardwareClass::Motor => &motor_windows,
                    HardwareClass::Sensor => &sensor_windows,
                };
                let Some(w_self) = windows[r].as_ref() else { continue };
                if class == HardwareClass::Motor && self.cfg.motor_moving_gate {
                    // Gate: the robot itself plus at least 4 others moving.
                    let others = moving_count - usize::from(moving[r]);
                    if !moving[r] || others < 4 {
                        continue;
                    }
                }
                let (coeffs, k2_hat, y) = match class {
                    HardwareClass::Motor => (&self.cfg.motor, self.k2_hat_motor, &self.y_motor),
                    HardwareClass::Sensor => (&self.cfg.sensor, self.k2_hat_sensor, &self.y_sensor),
                };
                let neighbours: Vec<&Paratope> = (0..self.cfg.n_robots)
                    .filter(|&j| j != r)
                    .filter_map(|j| windows[j].as_ref())
                    .collect();

                let x = match class {
                    HardwareClass::Motor => &mut self.robots[r].x_motor,
                    HardwareClass::Sensor => &mut self.robots[r].x_sensor,
                };
                for pop in x.entries.iter_mut() {
                    let xdot =
                        population_step(&pop.paratope, w_self, &neighbours, y, coeffs, k2_hat)?;
                    pop.level += xdot;
                }
                let before = x.entries.len();
                x.entries.retain(|p| p.level >= 0.0);
                report.removed += before - x.entries.len();

                let mut best_level = f64::NEG_INFINITY;
                let mut any_flagged = false;
                let mut best_diag: Option<(f64, DiagnosisCategory)> = None;
                for pop in &x.entries {
                    if pop.level > coeffs.fault_threshold {
                        any_flagged = true;
                        best_level = best_level.max(pop.level);
                        report.flagged.push(FlaggedParatope {
                            robot: r as u32,
                            class,
                            time,
                            level: pop.level,
                            paratope: pop.paratope.clone(),
                        });
                        if let Some((m, cat)) = diagnose(&pop.paratope, y, &coeffs.antigen_match)? {
                            if best_diag.map_or(true, |(bm, _)| m > bm) {
                                best_diag = Some((m, cat));
                            }
                        }
                    }
                }

                let slot = match class {
                    HardwareClass::Motor => &mut self.flagged[r][0],
                    HardwareClass::Sensor => &mut self.flagged[r][1],
                };
                let was_flagged = *slot;
                *slot = any_flagged;
                if any_flagged && !was_flagged {
                    report.detections.push(Detection {
                        robot: r as u32,
                        class,
                        time,
                        level: best_level,
                        diagnosis: best_diag,
                    });
                }
            }
        }
        Ok(report)
    }
}

/// Per-tick latched detection flags for a whole run, [motor, sensor].
#[derive(Debug, Clone)]
pub struct DetectionTimeline {
    pub n_robots: usize,
    pub n_ticks: u64,
    flags: Vec<[bool; 2]>,
}

impl DetectionTimeline {
    pub fn new(n_robots: usize, n_ticks: u64) -> Self {
        DetectionTimeline { n_robots, n_ticks, flags: vec![[false; 2]; n_robots * n_ticks as usize] }
    }

    fn index(&self, tick: u64, robot: usize) -> usize {
        debug_assert!(tick >= 1 && tick <= self.n_ticks);
        (tick as usize - 1) * self.n_robots + robot
    }

    pub fn get(&self, tick: u64, robot: usize) -> [bool; 2] {
        self.flags[self.index(tick, robot)]
    }

    pub fn any(&self, tick: u64, robot: usize) -> bool {
        let f = self.get(tick, robot);
        f[0] || f[1]
    }

    /// Latch `state` for `robot` from `from_tick` until the next cycle
    /// boundary (or the end of the run).
    pub fn latch(&mut self, robot: usize, from_tick: u64, state: [bool; 2]) {
        let until = (from_tick + CYCLE_TICKS - 1).min(self.n_ticks);
        for t in from_tick..=until {
            let i = self.index(t, robot);
            self.flags[i] = state;
        }
    }
}

/// A detection reconstructed from a recorded log.
#[derive(Debug, Clone)]
pub struct ReplayDetection {
    pub tick: u64,
    pub time: f64,
    pub robot: u32,
    pub class: HardwareClass,
    /// Smallest relevant degradation coefficient at the detection instant.
    pub delta: f64,
    /// Category actually present according to the logged coefficients.
    pub truth: DiagnosisCategory,
    pub diagnosis: Option<(f64, DiagnosisCategory)>,
}

/// Result of running the model offline over a recorded log.
pub struct ReplayOutcome {
    pub timeline: DetectionTimeline,
    pub detections: Vec<ReplayDetection>,
    /// Every population above threshold at every cycle, with ground-truth
    /// labels attached; the input to next-order repertoire construction.
    pub flagged: Vec<(FlaggedParatope, DiagnosisCategory)>,
}

/// Re-run the population dynamics over a recorded log. The engine sees
/// exactly the samples the live run saw, so replaying a log of a run that
/// took no online actions reproduces its detections.
pub fn replay_log(
    log: &ExperimentLog,
    motor_moving_gate: bool,
    y_motor: LabeledRepertoire,
    y_sensor: LabeledRepertoire,
    motor: DynamicsCoeffs,
    sensor: DynamicsCoeffs,
) -> Result<ReplayOutcome> {
    let n = log.n_robots;
    let cfg = ModelConfig { n_robots: n, motor, sensor, motor_moving_gate };
    let mut model = AapdModel::new(cfg, y_motor, y_sensor)?;
    let mut timeline = DetectionTimeline::new(n, log.n_ticks);
    let mut detections = Vec::new();
    let mut flagged = Vec::new();

    for tick in 1..=log.n_ticks {
        let mut active = vec![false; n];
        let mut moving = vec![false; n];
        for r in 0..n {
            let rec = log.record(tick, r);
            active[r] = rec.mode != ControllerMode::Lost;
            moving[r] = rec.moving;
            if active[r] {
                model.push_sample(r, [rec.v_norm, rec.omega_norm, rec.dp_norm], rec.gamma_norm)?;
            }
        }
        if tick % EXTRACT_TICKS == 0 {
            model.extract(&active, tick as f64 / 6.0)?;
        }
        if tick % CYCLE_TICKS == 0 {
            let time = tick as f64 / 6.0;
            let report = model.cycle(time, &moving, &active)?;
            for r in 0..n {
                timeline.latch(r, tick, model.detected(r));
            }
            for det in report.detections {
                let rec = log.record(tick, det.robot as usize);
                let delta = match det.class {
                    HardwareClass::Motor => rec.d_left.min(rec.d_right),
                    HardwareClass::Sensor => rec.d_sensor,
                };
                detections.push(ReplayDetection {
                    tick,
                    time,
                    robot: det.robot,
                    class: det.class,
                    delta,
                    truth: ground_truth_category_for_class(det.class, rec.d_left, rec.d_right, rec.d_sensor),
                    diagnosis: det.diagnosis,
                });
            }
            for fp in report.flagged {
                let rec = log.record(tick, fp.robot as usize);
                let truth =
                    ground_truth_category_for_class(fp.class, rec.d_left, rec.d_right, rec.d_sensor);
                flagged.push((fp, truth));
            }
        }
    }
    Ok(ReplayOutcome { timeline, detections, flagged })
}

fn ground_truth_category_for_class(
    class: HardwareClass,
    d_left: f64,
    d_right: f64,
    d_sensor: f64,
) -> DiagnosisCategory {
    match class {
        HardwareClass::Motor => ground_truth_category(class, d_left, d_right),
        HardwareClass::Sensor => {
            if d_sensor <= GROUND_TRUTH_D0 {
                DiagnosisCategory::SensorFault
            } else {
                DiagnosisCategory::FalsePositive
            }
        }
    }
}

/// One training input: a recorded log plus whether its run used the
/// local-positioning motor gate.
pub struct TrainingInput<'a> {
    pub log: &'a ExperimentLog,
    pub motor_moving_gate: bool,
}

/// Build the next-order labelled repertoires from recorded runs.
///
/// Each log (except the held-out one) is replayed with the current-order
/// repertoires; every population above threshold contributes its paratope,
/// labelled from the simulator ground truth at the detection instant.
/// Additions are merged per replicate in (robot, time) order, so the result
/// is deterministic.
pub fn build_next_order(
    inputs: &[TrainingInput<'_>],
    y_motor: &LabeledRepertoire,
    y_sensor: &LabeledRepertoire,
    motor: &DynamicsCoeffs,
    sensor: &DynamicsCoeffs,
    holdout: Option<usize>,
) -> Result<(LabeledRepertoire, LabeledRepertoire)> {
    let next_order = y_motor
        .entries
        .iter()
        .chain(y_sensor.entries.iter())
        .map(|e| e.order)
        .max()
        .unwrap_or(0)
        + 1;

    let mut next_motor = LabeledRepertoire::new(HardwareClass::Motor);
    let mut next_sensor = LabeledRepertoire::new(HardwareClass::Sensor);
    for (i, input) in inputs.iter().enumerate() {
        if holdout == Some(i) {
            continue;
        }
        let outcome = replay_log(
            input.log,
            input.motor_moving_gate,
            y_motor.clone(),
            y_sensor.clone(),
            motor.clone(),
            sensor.clone(),
        )?;
        let mut motor_additions = Vec::new();
        let mut sensor_additions = Vec::new();
        for (fp, truth) in outcome.flagged {
            let labelled = LabeledParatope {
                paratope: fp.paratope,
                category: truth,
                order: next_order,
                source_robot: fp.robot,
                source_time: fp.time,
            };
            match fp.class {
                HardwareClass::Motor => motor_additions.push(labelled),
                HardwareClass::Sensor => sensor_additions.push(labelled),
            }
        }
        next_motor.merge(motor_additions)?;
        next_sensor.merge(sensor_additions)?;
    }
    Ok((next_motor, next_sensor))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_paratope(class: HardwareClass, v: f64, len: usize) -> Paratope {
        let channels = (0..class.dim()).map(|_| vec![v; len]).collect();
        Paratope::new(class, channels).unwrap()
    }

    #[test]
    fn k2_rescaling_keeps_budget_invariant() {
        assert!((scale_k2(0.3, 10).unwrap() - 0.3).abs() < 1e-12);
        assert!((scale_k2(0.3, 4).unwrap() - 0.9).abs() < 1e-12);
        assert!((scale_k2(0.3, 2).unwrap() - 2.7).abs() < 1e-12);
        for n in 2..=20 {
            let k2_hat = scale_k2(0.3, n).unwrap();
            assert!((k2_hat * (n - 1) as f64 - 2.7).abs() < 1e-12);
        }
        assert!(scale_k2(0.3, 1).is_err());
    }

    #[test]
    fn step_reduces_to_self_stimulation_minus_decay() {
        // m(p, W_self) = s = 2.0 for an exact constant match; no neighbours,
        // empty Y: xdot = 2.0 - 1.2 = 0.8.
        let p = constant_paratope(HardwareClass::Sensor, 0.5, 30);
        let w = constant_paratope(HardwareClass::Sensor, 0.5, 30);
        let coeffs = DynamicsCoeffs {
            k1: 0.18,
            k2: 0.3,
            k3: 1.2,
            fault_threshold: 1.0,
            window_match: MatchParams { s: 2.0, g: 1, k: 0 },
            antigen_match: MatchParams::sensor_antigen(),
        };
        let y = LabeledRepertoire::new(HardwareClass::Sensor);
        let xdot = population_step(&p, &w, &[], &y, &coeffs, 0.3).unwrap();
        assert!((xdot - 0.8).abs() < 1e-12);
    }

    #[test]
    fn clone_swarm_step_is_strictly_negative() {
        // All nine neighbour windows identical to the robot's own: every
        // match equals m, so xdot = m * (1 - 9 * k2) - k3 = -1.7 m - 1.2.
        let p = constant_paratope(HardwareClass::Motor, 0.7, 30);
        let w = constant_paratope(HardwareClass::Motor, 0.7, 300);
        let coeffs = DynamicsCoeffs::motor_default();
        let k2_hat = scale_k2(coeffs.k2, 10).unwrap();
        let y = LabeledRepertoire::new(HardwareClass::Motor);
        let neighbours: Vec<&Paratope> = std::iter::repeat(&w).take(9).collect();
        let m = match_specificity(&p, &w, &coeffs.window_match).unwrap();
        assert!(m > 0.0);
        let xdot = population_step(&p, &w, &neighbours, &y, &coeffs, k2_hat).unwrap();
        assert!((xdot - (m * (1.0 - 9.0 * coeffs.k2) - coeffs.k3)).abs() < 1e-9);
        assert!(xdot < 0.0);
    }

    #[test]
    fn antigen_match_multiplies_stimulation() {
        // Arrange m(p, Y) = 1.0 exactly via a unit threshold, so the
        // stimulation multiplier becomes 1 + k1 = 1.24.
        let p = constant_paratope(HardwareClass::Motor, 0.5, 30);
        let w = constant_paratope(HardwareClass::Motor, 0.5, 300);
        let mut y = LabeledRepertoire::new(HardwareClass::Motor);
        y.entries.push(LabeledParatope {
            paratope: p.clone(),
            category: DiagnosisCategory::BothMotors,
            order: 1,
            source_robot: 0,
            source_time: 0.0,
        });
        let coeffs = DynamicsCoeffs {
            antigen_match: MatchParams { s: 1.0, g: 1, k: 0 },
            ..DynamicsCoeffs::motor_default()
        };
        let empty = LabeledRepertoire::new(HardwareClass::Motor);
        let with_y = population_step(&p, &w, &[], &y, &coeffs, 0.3).unwrap();
        let without_y = population_step(&p, &w, &[], &empty, &coeffs, 0.3).unwrap();
        let m_self = match_specificity(&p, &w, &coeffs.window_match).unwrap();
        assert!((with_y - without_y - coeffs.k1 * m_self).abs() < 1e-9);
        assert!(((with_y + coeffs.k3) / (without_y + coeffs.k3) - 1.24).abs() < 1e-9);
    }

    /// Drives a model with constant per-robot streams.
    fn drive_constant_swarm(
        model: &mut AapdModel,
        levels: &[f64],
        ticks: u64,
    ) -> Vec<CycleReport> {
        let n = levels.len();
        let active = vec![true; n];
        let moving = vec![true; n];
        let mut reports = Vec::new();
        for tick in 1..=ticks {
            for (r, &v) in levels.iter().enumerate() {
                model.push_sample(r, [v, 0.5, v], v).unwrap();
            }
            if tick % EXTRACT_TICKS == 0 {
                model.extract(&active, tick as f64 / 6.0).unwrap();
            }
            if tick % CYCLE_TICKS == 0 {
                reports.push(model.cycle(tick as f64 / 6.0, &moving, &active).unwrap());
            }
        }
        reports
    }

    #[test]
    fn clone_swarm_never_detects() {
        let cfg = ModelConfig::new(10, false);
        let mut model = AapdModel::new(
            cfg,
            LabeledRepertoire::new(HardwareClass::Motor),
            LabeledRepertoire::new(HardwareClass::Sensor),
        )
        .unwrap();
        let levels = vec![0.8; 10];
        let reports = drive_constant_swarm(&mut model, &levels, 1800);
        assert_eq!(reports.len(), 6);
        for report in &reports {
            assert!(report.detections.is_empty());
            assert!(report.flagged.is_empty());
        }
        for r in 0..10 {
            assert_eq!(model.detected(r), [false, false]);
        }
    }

    #[test]
    fn outlier_robot_is_detected_and_latched() {
        let cfg = ModelConfig::new(10, false);
        let mut model = AapdModel::new(
            cfg,
            LabeledRepertoire::new(HardwareClass::Motor),
            LabeledRepertoire::new(HardwareClass::Sensor),
        )
        .unwrap();
        // Robot 0 behaves nothing like the rest of the swarm.
        let mut levels = vec![0.8; 10];
        levels[0] = 0.1;
        let reports = drive_constant_swarm(&mut model, &levels, 1200);
        let detections: Vec<&Detection> =
            reports.iter().flat_map(|r| r.detections.iter()).collect();
        assert!(!detections.is_empty());
        assert!(detections.iter().all(|d| d.robot == 0));
        assert!(model.detected(0)[0] || model.detected(0)[1]);
        for r in 1..10 {
            assert_eq!(model.detected(r), [false, false]);
        }
        // A detection is reported once on the crossing, not on every cycle
        // the state persists.
        let motor_detections =
            detections.iter().filter(|d| d.class == HardwareClass::Motor).count();
        assert!(motor_detections <= 1, "got {motor_detections} motor crossings");
    }

    #[test]
    fn threshold_crossing_emits_detection_once_above_f() {
        // Stimulation tuned so each cycle adds exactly 0.25 (representable,
        // so the sums stay exact): x reaches 1.0 at the fourth cycle, which
        // does not cross F, and 1.25 at the fifth, which does.
        let coeffs = DynamicsCoeffs {
            k1: 0.24,
            k2: 0.3,
            k3: 3.75,
            fault_threshold: 1.0,
            window_match: MatchParams { s: 4.0, g: 1, k: 0 },
            antigen_match: MatchParams::motor_antigen(),
        };
        let cfg = ModelConfig {
            n_robots: 2,
            motor: coeffs,
            sensor: DynamicsCoeffs::sensor_default(),
            motor_moving_gate: false,
        };
        let mut model = AapdModel::new(
            cfg,
            LabeledRepertoire::new(HardwareClass::Motor),
            LabeledRepertoire::new(HardwareClass::Sensor),
        )
        .unwrap();
        // Robot 1 shares no behaviour with robot 0, so suppression is zero
        // and m_self = s = 4.0 gives xdot = 4.0 - 3.75 = 0.25 per cycle.
        let active = vec![true, true];
        let moving = vec![true, true];
        let mut crossings = Vec::new();
        for tick in 1..=2100u64 {
            model.push_sample(0, [0.9, 0.9, 0.9], 0.9).unwrap();
            model.push_sample(1, [0.1, 0.1, 0.1], 0.1).unwrap();
            if tick % EXTRACT_TICKS == 0 {
                model.extract(&active, tick as f64 / 6.0).unwrap();
            }
            if tick % CYCLE_TICKS == 0 {
                let report = model.cycle(tick as f64 / 6.0, &moving, &active).unwrap();
                for d in report.detections {
                    if d.class == HardwareClass::Motor && d.robot == 0 {
                        crossings.push(tick / CYCLE_TICKS);
                    }
                }
            }
        }
        assert_eq!(crossings, vec![5]);
    }

    #[test]
    fn diagnosis_uses_best_matching_label() {
        let p = constant_paratope(HardwareClass::Motor, 0.3, 30);
        let mut y = LabeledRepertoire::new(HardwareClass::Motor);
        y.entries.push(LabeledParatope {
            paratope: constant_paratope(HardwareClass::Motor, 0.9, 30),
            category: DiagnosisCategory::BothMotors,
            order: 1,
            source_robot: 0,
            source_time: 0.0,
        });
        y.entries.push(LabeledParatope {
            paratope: constant_paratope(HardwareClass::Motor, 0.32, 30),
            category: DiagnosisCategory::LeftMotor,
            order: 1,
            source_robot: 1,
            source_time: 50.0,
        });
        let params = MatchParams::motor_antigen();
        let (m, cat) = diagnose(&p, &y, &params).unwrap().unwrap();
        assert_eq!(cat, DiagnosisCategory::LeftMotor);
        assert!(m > 0.0);
    }

    #[test]
    fn no_match_means_undiagnosed() {
        let p = constant_paratope(HardwareClass::Motor, 0.0, 30);
        let mut y = LabeledRepertoire::new(HardwareClass::Motor);
        y.entries.push(LabeledParatope {
            paratope: constant_paratope(HardwareClass::Motor, 1.0, 30),
            category: DiagnosisCategory::BothMotors,
            order: 1,
            source_robot: 0,
            source_time: 0.0,
        });
        assert!(diagnose(&p, &y, &MatchParams::motor_antigen()).unwrap().is_none());
        // Empty repertoire likewise.
        let empty = LabeledRepertoire::new(HardwareClass::Motor);
        assert!(diagnose(&p, &empty, &MatchParams::motor_antigen()).unwrap().is_none());
    }

    #[test]
    fn ground_truth_labels_follow_coefficients() {
        use DiagnosisCategory::*;
        let m = HardwareClass::Motor;
        assert_eq!(ground_truth_category(m, 0.5, 0.5), BothMotors);
        assert_eq!(ground_truth_category(m, 0.5, 0.9), LeftMotor);
        assert_eq!(ground_truth_category(m, 0.9, 0.5), RightMotor);
        assert_eq!(ground_truth_category(m, 0.9, 0.9), FalsePositive);
        assert_eq!(ground_truth_category(HardwareClass::Sensor, 0.9, 0.9), SensorFault);
    }

    #[test]
    fn empty_y_matches_zeroth_order_regardless_of_k1() {
        // With Y empty the stimulation multiplier collapses to 1, so k1 has
        // no effect on the dynamics.
        let run = |k1: f64| -> Vec<usize> {
            let motor = DynamicsCoeffs { k1, ..DynamicsCoeffs::motor_default() };
            let cfg = ModelConfig {
                n_robots: 4,
                motor,
                sensor: DynamicsCoeffs::sensor_default(),
                motor_moving_gate: false,
            };
            let mut model = AapdModel::new(
                cfg,
                LabeledRepertoire::new(HardwareClass::Motor),
                LabeledRepertoire::new(HardwareClass::Sensor),
            )
            .unwrap();
            let levels = [0.1, 0.8, 0.82, 0.78];
            let reports = drive_constant_swarm(&mut model, &levels, 1500);
            reports.iter().map(|r| r.flagged.len()).collect()
        };
        assert_eq!(run(0.24), run(7.0));
    }

    #[test]
    fn timeline_latches_until_next_cycle() {
        let mut tl = DetectionTimeline::new(2, 900);
        tl.latch(0, 300, [true, false]);
        assert!(!tl.any(299, 0));
        assert!(tl.any(300, 0));
        assert!(tl.any(599, 0));
        assert!(!tl.any(600, 0));
        assert!(!tl.any(301, 1));
    }
}
