//! Deterministic fixed-step world engine.
//!
//! Each tick advances in a fixed stage order: fault schedule, controllers,
//! physics and power, sensing and window sampling, paratope extraction at
//! 5 s boundaries, population cycles at 50 s boundaries, detection actions,
//! then logging. Every random draw is keyed by robot, purpose, and tick, so
//! a `(config, seed)` pair fully determines the log.

use std::f64::consts::FRAC_PI_2;

use crate::behavior::{
    compute_network, gpf_step, lpf_step, Arena, ControllerMode, ControllerState, StepDecision,
    WorldView, BATTERY_LOW_FRACTION,
};
use crate::config::{
    Algorithm, DetectionMode, FaultSchedule, OnlineAction, ScenarioConfig,
};
use crate::dynamics::{AapdModel, ModelConfig, CYCLE_TICKS, EXTRACT_TICKS};
use crate::error::{Error, Result};
use crate::log::{
    DepositEvent, DetectionRecord, ExperimentLog, LostEvent, RunSummary, TickRecord,
    SUMMARY_VERSION,
};
use crate::matching::HardwareClass;
use crate::repertoire::{normalize_channel, Channel, DiagnosisCategory, LabeledRepertoire};
use crate::rng::{NoiseSource, Purpose};
use crate::robot::{
    background_power, compute_gamma, degrade_tick, inject_fault, sensing_range, step_change,
    step_pose, wheel_power, wheel_velocity, Degradation, PhysicalConstants, Pose, RobotState,
    RobotStatus, TICK_SECONDS,
};

/// Ground-truth oracle detector: a robot counts as faulty once any
/// degradation coefficient drops below `d0`.
pub fn oracle_detector(deg: &Degradation, d0: f64) -> bool {
    deg.min_all() < d0
}

/// A completed run: the per-tick log and the event summary.
pub struct RunOutput {
    pub log: ExperimentLog,
    pub summary: RunSummary,
}

/// Run one experiment. Labelled repertoires referenced by the config are
/// loaded from disk relative to the working directory.
pub fn run_experiment(cfg: &ScenarioConfig, seed: u64, replicate: u32) -> Result<RunOutput> {
    cfg.validate()?;
    let (y_motor, y_sensor) = match &cfg.detection {
        DetectionMode::Aapd { y_motor, y_sensor, .. } => {
            let load = |path: &Option<std::path::PathBuf>, class: HardwareClass| -> Result<LabeledRepertoire> {
                match path {
                    None => Ok(LabeledRepertoire::new(class)),
                    Some(p) => {
                        let y = LabeledRepertoire::load(p)?;
                        if y.class() != class {
                            return Err(Error::Config(format!(
                                "{} holds a {} repertoire, expected {}",
                                p.display(),
                                y.class(),
                                class
                            )));
                        }
                        Ok(y)
                    }
                }
            };
            (Some(load(y_motor, HardwareClass::Motor)?), Some(load(y_sensor, HardwareClass::Sensor)?))
        }
        _ => (None, None),
    };
    run_with_repertoires(cfg, seed, replicate, y_motor, y_sensor)
}

/// Run one experiment with repertoires supplied in memory (used by tests
/// and the training pipeline, bypassing file loading).
pub fn run_with_repertoires(
    cfg: &ScenarioConfig,
    seed: u64,
    replicate: u32,
    y_motor: Option<LabeledRepertoire>,
    y_sensor: Option<LabeledRepertoire>,
) -> Result<RunOutput> {
    cfg.validate()?;
    Engine::new(cfg.clone(), seed, replicate, y_motor, y_sensor)?.run()
}

/// Everything the engine tracks for one robot beyond `RobotState`.
struct RobotExtras {
    ctrl: ControllerState,
    /// Per-class repair owed after an online detection, [motor, sensor].
    repair_pending: [bool; 2],
    /// The oracle flagged this robot; cleared by maintenance.
    oracle_pending: bool,
    /// Diagnosis attached to the most recent detection, shown while any
    /// detection state is latched.
    current_diag: Option<DiagnosisCategory>,
    /// Per-robot gradual degradation probabilities per second.
    degrade_probs: [f64; 3],
}

struct Engine {
    cfg: ScenarioConfig,
    consts: PhysicalConstants,
    arena: Arena,
    noise: NoiseSource,
    seed: u64,
    replicate: u32,
    p_max: f64,
    robots: Vec<RobotState>,
    extras: Vec<RobotExtras>,
    aapd: Option<AapdModel>,
    /// Sensing ranges sampled on the previous tick, used by controllers.
    ranges: Vec<f64>,
    // Accumulated outputs.
    log: ExperimentLog,
    resources: u64,
    deposits: Vec<DepositEvent>,
    lost_events: Vec<LostEvent>,
    detections: Vec<DetectionRecord>,
    recharges: u32,
    repairs: u32,
    power_consumed: f64,
    power_recharged: f64,
}

/// Per-tick telemetry scratch for one robot.
#[derive(Clone, Copy, Default)]
struct Telemetry {
    v: f64,
    omega: f64,
    dp: f64,
    gamma: f64,
    v_norm: f64,
    omega_norm: f64,
    dp_norm: f64,
    gamma_norm: f64,
}

impl Engine {
    fn new(
        cfg: ScenarioConfig,
        seed: u64,
        replicate: u32,
        y_motor: Option<LabeledRepertoire>,
        y_sensor: Option<LabeledRepertoire>,
    ) -> Result<Self> {
        let consts = PhysicalConstants::default();
        let arena = Arena::new(cfg.arena);
        let noise = NoiseSource::new(seed);
        let n = cfg.n_robots;
        let p_max = cfg.p_max.unwrap_or(f64::INFINITY);

        let mut robots = Vec::with_capacity(n);
        let mut extras = Vec::with_capacity(n);
        for r in 0..n {
            let schedule = cfg.fault_schedules.schedule_for(r).clone();
            let draw3 = |purpose: Purpose| -> [f64; 3] {
                [
                    noise.uniform(r as u32, purpose, 0, 0),
                    noise.uniform(r as u32, purpose, 0, 1),
                    noise.uniform(r as u32, purpose, 0, 2),
                ]
            };
            let init = draw3(Purpose::InitDegradation);
            let (deg, probs) = match &schedule {
                FaultSchedule::None => (Degradation::perfect(), [0.0; 3]),
                FaultSchedule::StaticRange { lo, hi } => (
                    Degradation {
                        left: lo + init[0] * (hi - lo),
                        right: lo + init[1] * (hi - lo),
                        sensor: lo + init[2] * (hi - lo),
                    },
                    [0.0; 3],
                ),
                FaultSchedule::Gradual { d_init, p_left, p_right, p_sensor } => {
                    let p = draw3(Purpose::InitProbability);
                    (
                        Degradation {
                            left: d_init.sample(init[0]),
                            right: d_init.sample(init[1]),
                            sensor: d_init.sample(init[2]),
                        },
                        [p_left.sample(p[0]), p_right.sample(p[1]), p_sensor.sample(p[2])],
                    )
                }
                FaultSchedule::Spontaneous { d_init, fault, t } => {
                    let mut deg = Degradation {
                        left: d_init.sample(init[0]),
                        right: d_init.sample(init[1]),
                        sensor: d_init.sample(init[2]),
                    };
                    if *t <= 0.0 {
                        inject_fault(&mut deg, *fault);
                    }
                    (deg, [0.0; 3])
                }
                FaultSchedule::StepChange { d_init, .. } => (
                    Degradation {
                        left: d_init.sample(init[0]),
                        right: d_init.sample(init[1]),
                        sensor: d_init.sample(init[2]),
                    },
                    [0.0; 3],
                ),
            };
            // Evenly spaced about the base midpoint, just below the wall
            // line so no footprint starts inside a wall block.
            let spacing = 0.5;
            let x = 5.0 + (r as f64 - (n as f64 - 1.0) / 2.0) * spacing;
            robots.push(RobotState {
                id: r as u32,
                pose: Pose { x, y: 1.8, heading: FRAC_PI_2 },
                deg,
                initial_deg: deg,
                power: p_max,
                carrying: false,
                status: RobotStatus::Active,
            });
            extras.push(RobotExtras {
                ctrl: ControllerState::new(),
                repair_pending: [false; 2],
                oracle_pending: false,
                current_diag: None,
                degrade_probs: probs,
            });
        }

        let aapd = match &cfg.detection {
            DetectionMode::Aapd { .. } => {
                let model_cfg = ModelConfig::new(n, cfg.algorithm == Algorithm::Lpf);
                Some(AapdModel::new(
                    model_cfg,
                    y_motor.unwrap_or_else(|| LabeledRepertoire::new(HardwareClass::Motor)),
                    y_sensor.unwrap_or_else(|| LabeledRepertoire::new(HardwareClass::Sensor)),
                )?)
            }
            _ => None,
        };

        // Ranges for the first controller tick.
        let ranges = (0..n)
            .map(|r| {
                sensing_range(
                    robots[r].deg.sensor,
                    noise.std_normal(r as u32, Purpose::Range, 0),
                    &consts,
                )
            })
            .collect();

        Ok(Engine {
            log: ExperimentLog::new(n),
            cfg,
            consts,
            arena,
            noise,
            seed,
            replicate,
            p_max,
            robots,
            extras,
            aapd,
            ranges,
            resources: 0,
            deposits: Vec::new(),
            lost_events: Vec::new(),
            detections: Vec::new(),
            recharges: 0,
            repairs: 0,
            power_consumed: 0.0,
            power_recharged: 0.0,
        })
    }

    fn battery_low(&self, r: usize) -> bool {
        self.robots[r].power.is_finite()
            && self.robots[r].power < BATTERY_LOW_FRACTION * self.p_max
    }

    fn run(mut self) -> Result<RunOutput> {
        let ticks = self.cfg.ticks();
        let n = self.cfg.n_robots;
        for tick in 1..=ticks {
            let time = tick as f64 / 6.0;

            // Stage 1: fault schedules, then snapshot the coefficients the
            // tick runs under (logging and delta readings use the snapshot).
            for r in 0..n {
                if self.robots[r].is_lost() {
                    continue;
                }
                match self.cfg.fault_schedules.schedule_for(r).clone() {
                    FaultSchedule::Gradual { .. } => {
                        let draws = [
                            self.noise.uniform(r as u32, Purpose::DegradeLeft, tick, 0),
                            self.noise.uniform(r as u32, Purpose::DegradeRight, tick, 0),
                            self.noise.uniform(r as u32, Purpose::DegradeSensor, tick, 0),
                        ];
                        let probs = self.extras[r].degrade_probs;
                        degrade_tick(&mut self.robots[r].deg, &probs, &draws, TICK_SECONDS);
                    }
                    FaultSchedule::Spontaneous { fault, t, .. } => {
                        if t > 0.0 && tick == (t * 6.0).round() as u64 {
                            inject_fault(&mut self.robots[r].deg, fault);
                        }
                    }
                    FaultSchedule::StepChange { t, factor, .. } => {
                        if tick == (t * 6.0).round() as u64 {
                            let initial = self.robots[r].initial_deg;
                            step_change(&mut self.robots[r].deg, &initial, factor);
                        }
                    }
                    _ => {}
                }
            }
            let snapshot: Vec<Degradation> = self.robots.iter().map(|r| r.deg).collect();

            // Oracle detection runs every tick on the live coefficients.
            if let DetectionMode::Oracle { d0 } = self.cfg.detection {
                for r in 0..n {
                    if self.robots[r].is_lost() || self.extras[r].oracle_pending {
                        continue;
                    }
                    if oracle_detector(&self.robots[r].deg, d0) {
                        self.detections.push(DetectionRecord {
                            tick,
                            time_s: time,
                            robot: r as u32,
                            class: None,
                            delta: self.robots[r].deg.min_all(),
                            diagnosis: None,
                        });
                        match self.cfg.online_action {
                            OnlineAction::InstantReset => {
                                self.robots[r].deg = self.robots[r].initial_deg;
                                self.repairs += 1;
                            }
                            OnlineAction::ReturnToBase => {
                                self.extras[r].oracle_pending = true;
                            }
                        }
                    }
                }
            }

            // Stage 2: controllers against the frozen pre-move snapshot.
            let positions: Vec<(f64, f64)> =
                self.robots.iter().map(|r| (r.pose.x, r.pose.y)).collect();
            let lost_mask: Vec<bool> = self.robots.iter().map(|r| r.is_lost()).collect();
            let active_mask: Vec<bool> = lost_mask.iter().map(|&l| !l).collect();
            let networked = match self.cfg.algorithm {
                Algorithm::Lpf => {
                    compute_network(&positions, &self.ranges, &active_mask, &self.arena)
                }
                Algorithm::Gpf => vec![true; n],
            };

            let mut decisions: Vec<StepDecision> = Vec::with_capacity(n);
            for r in 0..n {
                if self.robots[r].is_lost() {
                    decisions.push(StepDecision {
                        cmd_left: 0.0,
                        cmd_right: 0.0,
                        mode: ControllerMode::Lost,
                        collect: false,
                        arrive_base: false,
                    });
                    continue;
                }
                let want_return = self.battery_low(r)
                    || self.extras[r].oracle_pending
                    || self.extras[r].repair_pending.iter().any(|&b| b);
                let view = WorldView {
                    arena: &self.arena,
                    consts: &self.consts,
                    positions: &positions,
                    lost: &lost_mask,
                    ranges: &self.ranges,
                    networked: &networked,
                    noise: &self.noise,
                    tick,
                };
                let pose = self.robots[r].pose;
                let carrying = self.robots[r].carrying;
                let ctrl = &mut self.extras[r].ctrl;
                let decision = match self.cfg.algorithm {
                    Algorithm::Gpf => gpf_step(r, pose, carrying, want_return, ctrl, &view),
                    Algorithm::Lpf => lpf_step(r, pose, carrying, want_return, ctrl, &view),
                };
                if decision.collect && !self.robots[r].carrying {
                    self.robots[r].carrying = true;
                }
                if decision.arrive_base {
                    self.service_at_base(r, tick);
                }
                self.robots[r].status = match decision.mode {
                    ControllerMode::Wait => RobotStatus::Waiting,
                    ControllerMode::Return => RobotStatus::ReturningToBase,
                    _ => RobotStatus::Active,
                };
                decisions.push(decision);
            }

            // Stage 3: physics and the power budget.
            let lost_positions: Vec<(f64, f64)> = (0..n)
                .filter(|&j| lost_mask[j])
                .map(|j| (self.robots[j].pose.x, self.robots[j].pose.y))
                .collect();
            let mut telemetry = vec![Telemetry::default(); n];
            let mut moving = vec![false; n];
            for r in 0..n {
                if self.robots[r].is_lost() {
                    continue;
                }
                let d = decisions[r];
                let deg = self.robots[r].deg;
                let v_l = wheel_velocity(
                    deg.left,
                    d.cmd_left,
                    self.noise.std_normal(r as u32, Purpose::VelLeft, tick),
                    &self.consts,
                );
                let v_r = wheel_velocity(
                    deg.right,
                    d.cmd_right,
                    self.noise.std_normal(r as u32, Purpose::VelRight, tick),
                    &self.consts,
                );
                let old = (self.robots[r].pose.x, self.robots[r].pose.y);
                let proposed = step_pose(self.robots[r].pose, v_l, v_r, TICK_SECONDS, self.consts.axle);
                let (x, y) = self.arena.resolve_position(
                    old,
                    (proposed.x, proposed.y),
                    self.consts.body_radius,
                    &lost_positions,
                );
                self.robots[r].pose = Pose { x, y, heading: proposed.heading };
                moving[r] = d.cmd_left != 0.0 || d.cmd_right != 0.0;

                let dp_l = wheel_power(
                    deg.left,
                    d.cmd_left != 0.0,
                    self.noise.std_normal(r as u32, Purpose::PowerLeft, tick),
                    &self.consts,
                );
                let dp_r = wheel_power(
                    deg.right,
                    d.cmd_right != 0.0,
                    self.noise.std_normal(r as u32, Purpose::PowerRight, tick),
                    &self.consts,
                );
                let dp_s = background_power(
                    self.noise.std_normal(r as u32, Purpose::PowerBackground, tick),
                    &self.consts,
                );
                let dp_total = dp_l + dp_r + dp_s;
                if self.robots[r].power.is_finite() {
                    let draw = (dp_total * TICK_SECONDS).min(self.robots[r].power);
                    self.robots[r].power -= draw;
                    self.power_consumed += draw;
                    if self.robots[r].power <= 0.0 {
                        self.robots[r].power = 0.0;
                        if self.arena.in_base(x, y) {
                            self.power_recharged += self.p_max;
                            self.robots[r].power = self.p_max;
                            self.recharges += 1;
                        } else {
                            self.robots[r].status = RobotStatus::Lost;
                            self.lost_events.push(LostEvent { tick, robot: r as u32 });
                            moving[r] = false;
                        }
                    }
                } else {
                    self.power_consumed += dp_total * TICK_SECONDS;
                }
                telemetry[r] = Telemetry {
                    v: 0.5 * (v_l + v_r),
                    omega: (v_r - v_l) / self.consts.axle,
                    dp: dp_total,
                    ..Default::default()
                };
            }

            // Stage 4: sensing, handshake, and window sampling.
            let active_now: Vec<bool> = self.robots.iter().map(|r| !r.is_lost()).collect();
            let positions_now: Vec<(f64, f64)> =
                self.robots.iter().map(|r| (r.pose.x, r.pose.y)).collect();
            let mut ranges_now = vec![0.0; n];
            for r in 0..n {
                if active_now[r] {
                    ranges_now[r] = sensing_range(
                        self.robots[r].deg.sensor,
                        self.noise.std_normal(r as u32, Purpose::Range, tick),
                        &self.consts,
                    );
                }
            }
            for r in 0..n {
                if !active_now[r] {
                    continue;
                }
                let gamma = compute_gamma(r, &positions_now, &ranges_now, &active_now, self.consts.r_max);
                let t = &mut telemetry[r];
                t.gamma = gamma;
                t.v_norm = normalize_channel(t.v, Channel::LinearVelocity, &self.consts);
                t.omega_norm = normalize_channel(t.omega, Channel::AngularVelocity, &self.consts);
                t.dp_norm = normalize_channel(t.dp, Channel::PowerRate, &self.consts);
                t.gamma_norm = normalize_channel(gamma, Channel::HandshakeRange, &self.consts);
                if let Some(model) = self.aapd.as_mut() {
                    model.push_sample(r, [t.v_norm, t.omega_norm, t.dp_norm], t.gamma_norm)?;
                }
            }
            self.ranges = ranges_now;

            // Stage 5: paratope extraction every 5 s.
            if let Some(model) = self.aapd.as_mut() {
                if tick % EXTRACT_TICKS == 0 {
                    model.extract(&active_now, time)?;
                }
            }

            // Stage 6 and 7: population cycles and detection actions.
            if tick % CYCLE_TICKS == 0 {
                if let Some(model) = self.aapd.as_mut() {
                    let report = model.cycle(time, &moving, &active_now)?;
                    for det in report.detections {
                        let r = det.robot as usize;
                        let delta = match det.class {
                            HardwareClass::Motor => snapshot[r].left.min(snapshot[r].right),
                            HardwareClass::Sensor => snapshot[r].sensor,
                        };
                        let diagnosis = det.diagnosis.map(|(_, cat)| cat);
                        self.detections.push(DetectionRecord {
                            tick,
                            time_s: time,
                            robot: det.robot,
                            class: Some(det.class),
                            delta,
                            diagnosis,
                        });
                        self.extras[r].current_diag = diagnosis;
                        match self.cfg.online_action {
                            OnlineAction::InstantReset => {
                                let initial = self.robots[r].initial_deg;
                                match det.class {
                                    HardwareClass::Motor => {
                                        self.robots[r].deg.left = initial.left;
                                        self.robots[r].deg.right = initial.right;
                                    }
                                    HardwareClass::Sensor => {
                                        self.robots[r].deg.sensor = initial.sensor;
                                    }
                                }
                                self.repairs += 1;
                            }
                            OnlineAction::ReturnToBase => {
                                let slot = match det.class {
                                    HardwareClass::Motor => 0,
                                    HardwareClass::Sensor => 1,
                                };
                                self.extras[r].repair_pending[slot] = true;
                            }
                        }
                    }
                    for r in 0..n {
                        if model.detected(r) == [false, false] {
                            self.extras[r].current_diag = None;
                        }
                    }
                }
            }

            // Stage 8: one record per robot.
            let mut rows = Vec::with_capacity(n);
            for r in 0..n {
                let flags = self.aapd.as_ref().map(|m| m.detected(r)).unwrap_or([false, false]);
                let t = &telemetry[r];
                let mode = if self.robots[r].is_lost() { ControllerMode::Lost } else { decisions[r].mode };
                rows.push(TickRecord {
                    tick,
                    time_s: time,
                    robot: r as u32,
                    pos_x: self.robots[r].pose.x,
                    pos_y: self.robots[r].pose.y,
                    heading: self.robots[r].pose.heading,
                    d_left: snapshot[r].left,
                    d_right: snapshot[r].right,
                    d_sensor: snapshot[r].sensor,
                    power: self.robots[r].power,
                    v: t.v,
                    omega: t.omega,
                    dp: t.dp,
                    gamma: t.gamma,
                    v_norm: t.v_norm,
                    omega_norm: t.omega_norm,
                    dp_norm: t.dp_norm,
                    gamma_norm: t.gamma_norm,
                    mode,
                    moving: moving[r],
                    carrying: self.robots[r].carrying,
                    detected_motor: flags[0],
                    detected_sensor: flags[1],
                    diagnosis: self.extras[r].current_diag,
                });
            }
            self.log.push_tick(tick, rows);
        }

        let summary = RunSummary {
            version: SUMMARY_VERSION,
            config: self.cfg.clone(),
            seed: self.seed,
            replicate: self.replicate,
            n_ticks: ticks,
            resources_collected: self.resources,
            deposits: self.deposits,
            lost: self.lost_events,
            detections: self.detections,
            recharges: self.recharges,
            repairs: self.repairs,
            power_consumed: self.power_consumed,
            power_recharged: self.power_recharged,
            final_deg: self
                .robots
                .iter()
                .map(|r| [r.deg.left, r.deg.right, r.deg.sensor])
                .collect(),
            final_power: self
                .robots
                .iter()
                .map(|r| r.power.is_finite().then_some(r.power))
                .collect(),
        };
        Ok(RunOutput { log: self.log, summary })
    }

    /// Base services, all instantaneous: deposit, recharge, repair, redeploy.
    fn service_at_base(&mut self, r: usize, tick: u64) {
        if self.robots[r].carrying {
            self.robots[r].carrying = false;
            self.resources += 1;
            self.deposits.push(DepositEvent { tick, robot: r as u32 });
        }
        if self.battery_low(r) {
            self.power_recharged += self.p_max - self.robots[r].power;
            self.robots[r].power = self.p_max;
            self.recharges += 1;
        }
        let initial = self.robots[r].initial_deg;
        if self.extras[r].oracle_pending {
            self.robots[r].deg = initial;
            self.extras[r].oracle_pending = false;
            self.repairs += 1;
        }
        if self.extras[r].repair_pending[0] {
            self.robots[r].deg.left = initial.left;
            self.robots[r].deg.right = initial.right;
            self.extras[r].repair_pending[0] = false;
            self.repairs += 1;
        }
        if self.extras[r].repair_pending[1] {
            self.robots[r].deg.sensor = initial.sensor;
            self.extras[r].repair_pending[1] = false;
            self.repairs += 1;
        }
        self.extras[r].current_diag = None;
        // Redeploy facing the arena.
        self.robots[r].pose.heading = FRAC_PI_2;
    }
}
