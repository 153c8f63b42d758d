//! Physical robot model: differential-drive kinematics, degradation
//! coefficients, power budget, sensing range, and the handshake metric used
//! to expose transmitter degradation.
//!
//! All stochastic functions take an explicit standard-normal or uniform draw
//! so that callers control the noise streams; passing 0.0 gives the
//! noise-free base value.

use serde::{Deserialize, Serialize};

/// Fixed physical constants of the platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Maximum linear wheel velocity, m/s.
    pub v_max: f64,
    /// Axial separation of the wheels, m.
    pub axle: f64,
    /// Maximum sensing range, m.
    pub r_max: f64,
    /// Maximum total rate of power consumption, 1/s.
    pub dp_max: f64,
    /// Maximum rate of power consumption per wheel motor, 1/s.
    pub dp_wheel_max: f64,
    /// Gaussian noise sigma as a fraction of the base value.
    pub noise_frac: f64,
    /// Collision footprint radius, m.
    pub body_radius: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        let dp_max = 1.0 / 300.0;
        PhysicalConstants {
            v_max: 0.22,
            axle: 0.16,
            r_max: 4.0,
            dp_max,
            dp_wheel_max: 0.4 * dp_max,
            noise_frac: 0.05,
            body_radius: 0.15,
        }
    }
}

impl PhysicalConstants {
    /// Constant draw of sensing, communication, and background processes.
    pub fn dp_background_base(&self) -> f64 {
        0.2 * self.dp_max
    }
}

/// Simulation tick length, aligned with the 6 Hz sampling clock.
pub const TICK_SECONDS: f64 = 1.0 / 6.0;

/// Planar pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Degradation severity coefficients: 1 is perfect, 0 is dead hardware.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub left: f64,
    pub right: f64,
    pub sensor: f64,
}

impl Degradation {
    pub fn perfect() -> Self {
        Degradation { left: 1.0, right: 1.0, sensor: 1.0 }
    }

    pub fn min_motor(&self) -> f64 {
        self.left.min(self.right)
    }

    pub fn min_all(&self) -> f64 {
        self.left.min(self.right).min(self.sensor)
    }
}

/// Spontaneous complete-failure modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpontaneousFault {
    /// Complete failure of both motors.
    H1,
    /// Complete failure of the left motor.
    H2,
    /// Complete failure of the sensor transmitter.
    H3,
}

/// High-level robot status as seen by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotStatus {
    Active,
    ReturningToBase,
    Waiting,
    Lost,
}

/// Physical state of one robot. Controller bookkeeping lives with the
/// behaviour module; behavioural windows live with the detection engine.
#[derive(Debug, Clone)]
pub struct RobotState {
    pub id: u32,
    pub pose: Pose,
    pub deg: Degradation,
    /// Coefficients restored on repair or instant reset.
    pub initial_deg: Degradation,
    /// Remaining power. `f64::INFINITY` disables the budget.
    pub power: f64,
    pub carrying: bool,
    pub status: RobotStatus,
}

impl RobotState {
    pub fn is_lost(&self) -> bool {
        self.status == RobotStatus::Lost
    }
}

/// Achievable wheel velocity under degradation. The velocity cap follows a
/// sigmoid in the degradation coefficient with 5% Gaussian noise on the cap;
/// the command fraction scales the (non-negative) cap.
pub fn wheel_velocity(d: f64, command: f64, z: f64, c: &PhysicalConstants) -> f64 {
    let base = c.v_max / (1.0 + (-5.0 * (2.0 * d - 1.0)).exp());
    let cap = base + z * c.noise_frac * base;
    command * cap.max(0.0)
}

/// Rate of power consumption of one wheel motor. Degraded motors draw more:
/// the load sigmoid is calibrated so a perfect motor runs at 75% of maximum
/// load. Unused wheels draw nothing.
pub fn wheel_power(d: f64, in_use: bool, z: f64, c: &PhysicalConstants) -> f64 {
    if !in_use {
        return 0.0;
    }
    let base = c.dp_wheel_max / (1.0 + (-10.0 * ((1.0 - d) + 0.11)).exp());
    (base + z * c.noise_frac * base).max(0.0)
}

/// Rate of power consumption of sensing, communication, and background
/// processes: constant plus Gaussian noise, floored at zero.
pub fn background_power(z: f64, c: &PhysicalConstants) -> f64 {
    let base = c.dp_background_base();
    (base + z * c.noise_frac * base).max(0.0)
}

/// Sensing range under transmitter degradation, from the inverse square law,
/// clamped to [0, r_max].
pub fn sensing_range(d_sensor: f64, z: f64, c: &PhysicalConstants) -> f64 {
    let base = c.r_max * d_sensor.sqrt();
    (base + z * c.noise_frac * base).clamp(0.0, c.r_max)
}

/// Unicycle integration of one tick: heading first, then translation along
/// the new heading. Collision clipping is the arena's job.
pub fn step_pose(pose: Pose, v_left: f64, v_right: f64, dt: f64, axle: f64) -> Pose {
    let v = 0.5 * (v_left + v_right);
    let omega = (v_right - v_left) / axle;
    let heading = pose.heading + omega * dt;
    Pose {
        x: pose.x + v * dt * heading.cos(),
        y: pose.y + v * dt * heading.sin(),
        heading,
    }
}

/// Handshake asymmetry distance for robot `idx`: the closest neighbour it
/// senses (distance within the neighbour's emitted range) that cannot sense
/// it back (distance beyond its own range). Falls back to `r_max` when every
/// sensed neighbour is mutual, or no neighbour is sensed at all.
pub fn compute_gamma(
    idx: usize,
    positions: &[(f64, f64)],
    ranges: &[f64],
    active: &[bool],
    r_max: f64,
) -> f64 {
    let own_range = ranges[idx];
    let (x, y) = positions[idx];
    let mut gamma = r_max;
    for j in 0..positions.len() {
        if j == idx || !active[j] {
            continue;
        }
        let (xj, yj) = positions[j];
        let dist = ((x - xj).powi(2) + (y - yj).powi(2)).sqrt();
        let senses_neighbour = dist <= ranges[j];
        let sensed_back = dist <= own_range;
        if senses_neighbour && !sensed_back && dist < gamma {
            gamma = dist;
        }
    }
    gamma
}

/// One tick of stochastic gradual degradation: each coefficient drops by
/// 0.01 with per-tick probability `p * dt`, independently, floored at zero.
/// `draws` are uniform (0,1) samples for left, right, sensor.
pub fn degrade_tick(deg: &mut Degradation, probs: &[f64; 3], draws: &[f64; 3], dt: f64) {
    let coeffs = [&mut deg.left, &mut deg.right, &mut deg.sensor];
    for ((d, &p), &u) in coeffs.into_iter().zip(probs).zip(draws) {
        if p > 0.0 && u < p * dt {
            *d = (*d - 0.01).max(0.0);
        }
    }
}

/// Apply a spontaneous complete failure. Unaffected coefficients keep their
/// current values.
pub fn inject_fault(deg: &mut Degradation, fault: SpontaneousFault) {
    match fault {
        SpontaneousFault::H1 => {
            deg.left = 0.0;
            deg.right = 0.0;
        }
        SpontaneousFault::H2 => {
            deg.left = 0.0;
        }
        SpontaneousFault::H3 => {
            deg.sensor = 0.0;
        }
    }
}

/// Instant step change: every coefficient drops to `factor` of its initial
/// value.
pub fn step_change(deg: &mut Degradation, initial: &Degradation, factor: f64) {
    deg.left = initial.left * factor;
    deg.right = initial.right * factor;
    deg.sensor = initial.sensor * factor;
}
