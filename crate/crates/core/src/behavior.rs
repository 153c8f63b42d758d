//! Foraging controllers, arena geometry, and ad-hoc network connectivity.
//!
//! Two controllers are provided. Global-positioning foraging (GPF) assumes
//! every robot can localise itself; local-positioning foraging (LPF) only
//! lets a robot move while it has a chain of networked nodes back to the
//! base, each hop within both 3 m and the emitting node's sensing range.
//!
//! Controllers are pure per-robot functions of a frozen world snapshot and
//! are evaluated in robot-index order, so same-tick interactions are
//! deterministic.

use crate::config::ArenaKind;
use crate::rng::{NoiseSource, Purpose};
use crate::robot::{PhysicalConstants, Pose};

use serde::{Deserialize, Serialize};

/// Arena side length, m.
pub const ARENA_SIZE: f64 = 10.0;
/// Robots within this distance of a nest centre may collect under GPF.
pub const GPF_COLLECT_RADIUS: f64 = 0.75;
/// Robots within this distance of a nest centre may collect under LPF.
pub const LPF_COLLECT_RADIUS: f64 = 0.5;
/// Objects closer than this trigger the avoidance branch.
pub const AVOID_DISTANCE: f64 = 0.5;
/// Maximum hop length of the ad-hoc network.
pub const NETWORK_HOP: f64 = 3.0;
/// Fraction of capacity below which a robot returns to recharge.
pub const BATTERY_LOW_FRACTION: f64 = 0.25;

/// Axis-aligned wall block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    /// Closest point of the rectangle to `(x, y)`.
    fn closest_point(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(self.x0, self.x1), y.clamp(self.y0, self.y1))
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Arena geometry: bounds, three resource nests, the base strip, and the
/// wall blocks of the constrained layout.
#[derive(Debug, Clone)]
pub struct Arena {
    pub kind: ArenaKind,
    pub nests: [(f64, f64); 3],
    pub nest_radius: f64,
    /// The base spans the full width for y <= base_depth.
    pub base_depth: f64,
    pub walls: Vec<Rect>,
}

impl Arena {
    pub fn new(kind: ArenaKind) -> Self {
        let walls = match kind {
            ArenaKind::Empty => Vec::new(),
            // Three corridors of 2 m width and 5 m length between the nests
            // and the base, formed by four wall blocks.
            ArenaKind::Constrained => vec![
                Rect { x0: 0.0, y0: 2.0, x1: 1.0, y1: 7.0 },
                Rect { x0: 3.0, y0: 2.0, x1: 4.0, y1: 7.0 },
                Rect { x0: 6.0, y0: 2.0, x1: 7.0, y1: 7.0 },
                Rect { x0: 9.0, y0: 2.0, x1: 10.0, y1: 7.0 },
            ],
        };
        Arena {
            kind,
            nests: [(2.0, 8.0), (5.0, 8.0), (8.0, 8.0)],
            nest_radius: 1.0,
            base_depth: 2.0,
            walls,
        }
    }

    pub fn in_base(&self, _x: f64, y: f64) -> bool {
        y <= self.base_depth
    }

    /// Distance from a point to the base region (zero inside it).
    pub fn distance_to_base(&self, _x: f64, y: f64) -> f64 {
        (y - self.base_depth).max(0.0)
    }

    /// Nearest nest centre and its distance.
    pub fn nearest_nest(&self, x: f64, y: f64) -> ((f64, f64), f64) {
        let mut best = (self.nests[0], f64::INFINITY);
        for &nest in &self.nests {
            let d = ((x - nest.0).powi(2) + (y - nest.1).powi(2)).sqrt();
            if d < best.1 {
                best = (nest, d);
            }
        }
        best
    }

    /// Resolve a proposed move against bounds and walls; the robot is a disc
    /// of the given radius. Falls back to the old position when a push-out
    /// still penetrates.
    pub fn resolve_position(
        &self,
        old: (f64, f64),
        proposed: (f64, f64),
        radius: f64,
        static_discs: &[(f64, f64)],
    ) -> (f64, f64) {
        let mut x = proposed.0.clamp(radius, ARENA_SIZE - radius);
        let mut y = proposed.1.clamp(radius, ARENA_SIZE - radius);
        for wall in &self.walls {
            if wall.contains(x, y) {
                return old;
            }
            let (cx, cy) = wall.closest_point(x, y);
            let dx = x - cx;
            let dy = y - cy;
            let d2 = dx * dx + dy * dy;
            if d2 < radius * radius {
                let d = d2.sqrt();
                if d < 1e-9 {
                    return old;
                }
                x = cx + dx / d * radius;
                y = cy + dy / d * radius;
            }
        }
        for &(ox, oy) in static_discs {
            let dx = x - ox;
            let dy = y - oy;
            let min_d = 2.0 * radius;
            let d2 = dx * dx + dy * dy;
            if d2 < min_d * min_d {
                let d = d2.sqrt();
                if d < 1e-9 {
                    return old;
                }
                x = ox + dx / d * min_d;
                y = oy + dy / d * min_d;
            }
        }
        x = x.clamp(radius, ARENA_SIZE - radius);
        y = y.clamp(radius, ARENA_SIZE - radius);
        for wall in &self.walls {
            let (cx, cy) = wall.closest_point(x, y);
            if (x - cx).powi(2) + (y - cy).powi(2) < (radius * 0.999).powi(2) {
                return old;
            }
        }
        (x, y)
    }

    /// Does a disc of `radius` at `(x, y)` violate bounds or walls?
    pub fn penetrates(&self, x: f64, y: f64, radius: f64) -> bool {
        if x < radius - 1e-9
            || y < radius - 1e-9
            || x > ARENA_SIZE - radius + 1e-9
            || y > ARENA_SIZE - radius + 1e-9
        {
            return true;
        }
        self.walls.iter().any(|w| {
            let (cx, cy) = w.closest_point(x, y);
            (x - cx).powi(2) + (y - cy).powi(2) < (radius - 1e-9).powi(2)
        })
    }
}

/// What the controller decided this tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Forward,
    Approach,
    Collect,
    Return,
    AtBase,
    Avoid,
    Explore,
    Wait,
    Lost,
}

impl std::fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let token = match self {
            ControllerMode::Forward => "forward",
            ControllerMode::Approach => "approach",
            ControllerMode::Collect => "collect",
            ControllerMode::Return => "return",
            ControllerMode::AtBase => "at_base",
            ControllerMode::Avoid => "avoid",
            ControllerMode::Explore => "explore",
            ControllerMode::Wait => "wait",
            ControllerMode::Lost => "lost",
        };
        write!(f, "{token}")
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "forward" => ControllerMode::Forward,
            "approach" => ControllerMode::Approach,
            "collect" => ControllerMode::Collect,
            "return" => ControllerMode::Return,
            "at_base" => ControllerMode::AtBase,
            "avoid" => ControllerMode::Avoid,
            "explore" => ControllerMode::Explore,
            "wait" => ControllerMode::Wait,
            "lost" => ControllerMode::Lost,
            other => {
                return Err(crate::error::Error::Io(format!("unknown controller mode {other}")))
            }
        })
    }
}

/// Per-robot controller bookkeeping that persists across ticks.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub explore_heading: f64,
    pub next_explore_redraw: u64,
    /// After rotating clear of an obstacle, drive straight until this tick
    /// before resuming target pursuit. Re-steering immediately would turn
    /// straight back into the obstacle and oscillate in place.
    pub avoid_escape_until: u64,
}

impl ControllerState {
    pub fn new() -> Self {
        ControllerState {
            explore_heading: std::f64::consts::FRAC_PI_2,
            next_explore_redraw: 0,
            avoid_escape_until: 0,
        }
    }
}

impl Default for ControllerState {
    fn default() -> Self {
        Self::new()
    }
}

/// Frozen world snapshot handed to each controller.
pub struct WorldView<'a> {
    pub arena: &'a Arena,
    pub consts: &'a PhysicalConstants,
    pub positions: &'a [(f64, f64)],
    /// Robots that became static obstacles.
    pub lost: &'a [bool],
    /// Sensing ranges sampled on the previous tick.
    pub ranges: &'a [f64],
    /// Ad-hoc network connectivity this tick (LPF only).
    pub networked: &'a [bool],
    pub noise: &'a NoiseSource,
    pub tick: u64,
}

/// Wheel commands plus the events the simulator must apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub cmd_left: f64,
    pub cmd_right: f64,
    pub mode: ControllerMode,
    /// Picked up a resource this tick.
    pub collect: bool,
    /// Reached the base in return mode this tick.
    pub arrive_base: bool,
}

impl StepDecision {
    fn still(mode: ControllerMode) -> Self {
        StepDecision { cmd_left: 0.0, cmd_right: 0.0, mode, collect: false, arrive_base: false }
    }

    fn drive(cmds: (f64, f64), mode: ControllerMode) -> Self {
        StepDecision {
            cmd_left: cmds.0,
            cmd_right: cmds.1,
            mode,
            collect: false,
            arrive_base: false,
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Differential-drive steering toward a target heading: rotate in place for
/// large errors, otherwise slow the inner wheel.
fn steer_heading(current: f64, target: f64) -> (f64, f64) {
    let err = wrap_angle(target - current);
    if err.abs() > std::f64::consts::FRAC_PI_4 {
        // err > 0 means the target lies to the left; positive spin needs the
        // right wheel faster.
        if err > 0.0 {
            (-0.5, 0.5)
        } else {
            (0.5, -0.5)
        }
    } else {
        let factor = err / std::f64::consts::FRAC_PI_4;
        if err > 0.0 {
            (1.0 - 0.9 * factor, 1.0)
        } else {
            (1.0, 1.0 + 0.9 * factor)
        }
    }
}

fn steer_to_point(pose: Pose, target: (f64, f64)) -> (f64, f64) {
    let bearing = (target.1 - pose.y).atan2(target.0 - pose.x);
    steer_heading(pose.heading, bearing)
}

/// Nearest object ahead of the robot: walls, bounds, and other robots
/// within the front half-plane, measured from the robot centre to the
/// object surface. Returns `(distance, relative bearing)`.
pub fn nearest_object_in_front(
    idx: usize,
    pose: Pose,
    view: &WorldView<'_>,
) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |px: f64, py: f64, surface_offset: f64| {
        let dx = px - pose.x;
        let dy = py - pose.y;
        let dist = (dx * dx + dy * dy).sqrt() - surface_offset;
        let rel = wrap_angle(dy.atan2(dx) - pose.heading);
        if rel.abs() < std::f64::consts::FRAC_PI_2 && best.map_or(true, |(d, _)| dist < d) {
            best = Some((dist, rel));
        }
    };
    // Arena bounds, as the nearest point of each border segment.
    consider(0.0, pose.y.clamp(0.0, ARENA_SIZE), 0.0);
    consider(ARENA_SIZE, pose.y.clamp(0.0, ARENA_SIZE), 0.0);
    consider(pose.x.clamp(0.0, ARENA_SIZE), 0.0, 0.0);
    consider(pose.x.clamp(0.0, ARENA_SIZE), ARENA_SIZE, 0.0);
    for wall in &view.arena.walls {
        let (cx, cy) = wall.closest_point(pose.x, pose.y);
        consider(cx, cy, 0.0);
    }
    for (j, &(ox, oy)) in view.positions.iter().enumerate() {
        if j != idx {
            consider(ox, oy, view.consts.body_radius);
        }
    }
    best
}

/// Rotate in place away from the blocking object.
pub fn avoid_step(object_bearing: f64) -> (f64, f64) {
    // Object to the left (or dead ahead): turn right; otherwise turn left.
    if object_bearing >= 0.0 {
        (0.5, -0.5)
    } else {
        (-0.5, 0.5)
    }
}

/// Ticks of straight motion after clearing an obstacle.
const AVOID_ESCAPE_TICKS: u64 = 12;

/// Shared avoidance branch: rotate while something blocks the way ahead,
/// then hold a straight escape leg so the robot actually passes around the
/// obstacle instead of turning back into it.
fn avoidance(
    idx: usize,
    pose: Pose,
    ctrl: &mut ControllerState,
    view: &WorldView<'_>,
) -> Option<StepDecision> {
    if let Some((dist, bearing)) = nearest_object_in_front(idx, pose, view) {
        if dist <= AVOID_DISTANCE {
            ctrl.avoid_escape_until = view.tick + AVOID_ESCAPE_TICKS;
            // Any stored explore heading is stale after the turn.
            ctrl.next_explore_redraw = view.tick;
            return Some(StepDecision::drive(avoid_step(bearing), ControllerMode::Avoid));
        }
    }
    if view.tick < ctrl.avoid_escape_until {
        return Some(StepDecision::drive((1.0, 1.0), ControllerMode::Avoid));
    }
    None
}

/// Steering target for the journey back to the base. The constrained arena
/// routes through the nearest corridor mouth first.
pub fn return_target(arena: &Arena, pose: Pose) -> (f64, f64) {
    if arena.kind == ArenaKind::Constrained && pose.y > 7.0 {
        let corridor_x = [2.0, 5.0, 8.0]
            .into_iter()
            .min_by(|a, b| {
                (pose.x - a).abs().partial_cmp(&(pose.x - b).abs()).expect("finite")
            })
            .expect("three corridors");
        return (corridor_x, 6.5);
    }
    (pose.x, 1.0)
}

/// Wheel commands steering back to the base region.
pub fn return_to_base_step(arena: &Arena, pose: Pose) -> (f64, f64) {
    steer_to_point(pose, return_target(arena, pose))
}

fn forward_step(arena: &Arena, pose: Pose) -> (f64, f64) {
    // Out of the base first in the constrained layout so robots do not pile
    // against the wall bottoms.
    if arena.kind == ArenaKind::Constrained && pose.y < arena.base_depth + 0.2 {
        let corridor_x = [2.0, 5.0, 8.0]
            .into_iter()
            .min_by(|a, b| {
                (pose.x - a).abs().partial_cmp(&(pose.x - b).abs()).expect("finite")
            })
            .expect("three corridors");
        return steer_to_point(pose, (corridor_x, 3.0));
    }
    (1.0, 1.0)
}

/// Global-positioning foraging, one tick.
///
/// Branch priority: avoid; return (resource, low battery, or detected
/// fault) with base services on arrival; collect; approach; move forwards.
pub fn gpf_step(
    idx: usize,
    pose: Pose,
    carrying: bool,
    want_return: bool,
    ctrl: &mut ControllerState,
    view: &WorldView<'_>,
) -> StepDecision {
    if let Some(decision) = avoidance(idx, pose, ctrl, view) {
        return decision;
    }
    if carrying || want_return {
        if view.arena.in_base(pose.x, pose.y) {
            let mut d = StepDecision::still(ControllerMode::AtBase);
            d.arrive_base = true;
            return d;
        }
        return StepDecision::drive(return_to_base_step(view.arena, pose), ControllerMode::Return);
    }
    let (nest, dist) = view.arena.nearest_nest(pose.x, pose.y);
    if dist <= GPF_COLLECT_RADIUS {
        let mut d = StepDecision::still(ControllerMode::Collect);
        d.collect = true;
        return d;
    }
    if dist <= view.ranges[idx] {
        return StepDecision::drive(steer_to_point(pose, nest), ControllerMode::Approach);
    }
    StepDecision::drive(forward_step(view.arena, pose), ControllerMode::Forward)
}

/// Local-positioning foraging, one tick.
///
/// A robot that cannot localise (no valid chain to the base) waits. The
/// collect threshold is tighter than GPF and undirected motion is a seeded
/// random explore.
pub fn lpf_step(
    idx: usize,
    pose: Pose,
    carrying: bool,
    want_return: bool,
    ctrl: &mut ControllerState,
    view: &WorldView<'_>,
) -> StepDecision {
    if !view.networked[idx] {
        return StepDecision::still(ControllerMode::Wait);
    }
    if let Some(decision) = avoidance(idx, pose, ctrl, view) {
        return decision;
    }
    if carrying || want_return {
        if view.arena.in_base(pose.x, pose.y) {
            let mut d = StepDecision::still(ControllerMode::AtBase);
            d.arrive_base = true;
            return d;
        }
        return StepDecision::drive(return_to_base_step(view.arena, pose), ControllerMode::Return);
    }
    let (nest, dist) = view.arena.nearest_nest(pose.x, pose.y);
    if dist <= LPF_COLLECT_RADIUS {
        let mut d = StepDecision::still(ControllerMode::Collect);
        d.collect = true;
        return d;
    }
    if dist <= view.ranges[idx] {
        return StepDecision::drive(steer_to_point(pose, nest), ControllerMode::Approach);
    }
    // Random explore: straight motion, heading redrawn every 5 s.
    if view.tick >= ctrl.next_explore_redraw {
        let u = view.noise.uniform(idx as u32, Purpose::ExploreHeading, view.tick, 0);
        ctrl.explore_heading = u * std::f64::consts::TAU - std::f64::consts::PI;
        ctrl.next_explore_redraw = view.tick + 30;
    }
    StepDecision::drive(steer_heading(pose.heading, ctrl.explore_heading), ControllerMode::Explore)
}

/// Breadth-first network expansion from the base. A robot joins the network
/// if it lies within `NETWORK_HOP` of the base region, or within
/// `min(NETWORK_HOP, r_j)` of an already networked robot `j` (the hop is
/// limited by the emitting node's sensing range).
pub fn compute_network(
    positions: &[(f64, f64)],
    ranges: &[f64],
    active: &[bool],
    arena: &Arena,
) -> Vec<bool> {
    let n = positions.len();
    let mut networked = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    for i in 0..n {
        if active[i] && arena.distance_to_base(positions[i].0, positions[i].1) <= NETWORK_HOP {
            networked[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(j) = queue.pop_front() {
        let hop = NETWORK_HOP.min(ranges[j]);
        for i in 0..n {
            if networked[i] || !active[i] {
                continue;
            }
            let d = ((positions[i].0 - positions[j].0).powi(2)
                + (positions[i].1 - positions[j].1).powi(2))
            .sqrt();
            if d <= hop {
                networked[i] = true;
                queue.push_back(i);
            }
        }
    }
    networked
}

/// Distance from a robot to the closest networked node (base or robot).
pub fn nearest_networked_distance(
    idx: usize,
    positions: &[(f64, f64)],
    networked: &[bool],
    arena: &Arena,
) -> f64 {
    let (x, y) = positions[idx];
    let mut best = arena.distance_to_base(x, y);
    for (j, &(ox, oy)) in positions.iter().enumerate() {
        if j == idx || !networked[j] {
            continue;
        }
        let d = ((x - ox).powi(2) + (y - oy).powi(2)).sqrt();
        if d < best {
            best = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn empty_view<'a>(
        arena: &'a Arena,
        consts: &'a PhysicalConstants,
        positions: &'a [(f64, f64)],
        lost: &'a [bool],
        ranges: &'a [f64],
        networked: &'a [bool],
        noise: &'a NoiseSource,
    ) -> WorldView<'a> {
        WorldView { arena, consts, positions, lost, ranges, networked, noise, tick: 1 }
    }

    #[test]
    fn gpf_avoids_object_dead_ahead() {
        let arena = Arena::new(ArenaKind::Empty);
        let c = consts();
        let noise = NoiseSource::new(0);
        let positions = vec![(5.0, 5.0), (5.4, 5.0)];
        let lost = vec![false, false];
        let ranges = vec![4.0, 4.0];
        let networked = vec![true, true];
        let view = empty_view(&arena, &c, &positions, &lost, &ranges, &networked, &noise);
        let pose = Pose { x: 5.0, y: 5.0, heading: 0.0 };
        let mut ctrl = ControllerState::new();
        let d = gpf_step(0, pose, false, false, &mut ctrl, &view);
        assert_eq!(d.mode, ControllerMode::Avoid);
        // Pure rotation.
        assert_eq!(d.cmd_left, -d.cmd_right);
    }

    #[test]
    fn gpf_ignores_clear_objects() {
        let arena = Arena::new(ArenaKind::Empty);
        let c = consts();
        let noise = NoiseSource::new(0);
        let positions = vec![(5.0, 5.0), (5.75, 5.0)];
        let lost = vec![false, false];
        let ranges = vec![0.1, 4.0];
        let networked = vec![true, true];
        let view = empty_view(&arena, &c, &positions, &lost, &ranges, &networked, &noise);
        let pose = Pose { x: 5.0, y: 5.0, heading: 0.0 };
        // Neighbour surface at 0.75 - 0.15 = 0.6: clear of the threshold.
        let mut ctrl = ControllerState::new();
        let d = gpf_step(0, pose, false, false, &mut ctrl, &view);
        assert_ne!(d.mode, ControllerMode::Avoid);
    }

    #[test]
    fn gpf_collects_near_nest_centre() {
        let arena = Arena::new(ArenaKind::Empty);
        let c = consts();
        let noise = NoiseSource::new(0);
        let positions = vec![(5.0, 7.3)];
        let lost = vec![false];
        let ranges = vec![4.0];
        let networked = vec![true];
        let view = empty_view(&arena, &c, &positions, &lost, &ranges, &networked, &noise);
        let pose = Pose { x: 5.0, y: 7.3, heading: 1.57 };
        let mut ctrl = ControllerState::new();
        let d = gpf_step(0, pose, false, false, &mut ctrl, &view);
        assert_eq!(d.mode, ControllerMode::Collect);
        assert!(d.collect);
    }

    #[test]
    fn gpf_deposits_when_carrying_inside_base() {
        let arena = Arena::new(ArenaKind::Empty);
        let c = consts();
        let noise = NoiseSource::new(0);
        let positions = vec![(5.0, 1.5)];
        let lost = vec![false];
        let ranges = vec![4.0];
        let networked = vec![true];
        let view = empty_view(&arena, &c, &positions, &lost, &ranges, &networked, &noise);
        let pose = Pose { x: 5.0, y: 1.5, heading: -1.57 };
        let mut ctrl = ControllerState::new();
        let d = gpf_step(0, pose, true, false, &mut ctrl, &view);
        assert_eq!(d.mode, ControllerMode::AtBase);
        assert!(d.arrive_base);
    }

    #[test]
    fn gpf_returns_when_carrying() {
        let arena = Arena::new(ArenaKind::Empty);
        let c = consts();
        let noise = NoiseSource::new(0);
        let positions = vec![(5.0, 8.0)];
        let lost = vec![false];
        let ranges = vec![4.0];
        let networked = vec![true];
        let view = empty_view(&arena, &c, &positions, &lost, &ranges, &networked, &noise);
        let pose = Pose { x: 5.0, y: 8.0, heading: std::f64::consts::FRAC_PI_2 };
        let mut ctrl = ControllerState::new();
        let d = gpf_step(0, pose, true, false, &mut ctrl, &view);
        assert_eq!(d.mode, ControllerMode::Return);
    }

    #[test]
    fn return_target_heads_for_base_edge() {
        let arena = Arena::new(ArenaKind::Empty);
        let pose = Pose { x: 5.0, y: 8.0, heading: 0.0 };
        assert_eq!(return_target(&arena, pose), (5.0, 1.0));
    }

    #[test]
    fn lpf_waits_without_network() {
        let arena = Arena::new(ArenaKind::Empty);
        let c = consts();
        let noise = NoiseSource::new(0);
        let positions = vec![(5.0, 6.0)];
        let lost = vec![false];
        let ranges = vec![4.0];
        let networked = vec![false];
        let view = empty_view(&arena, &c, &positions, &lost, &ranges, &networked, &noise);
        let pose = Pose { x: 5.0, y: 6.0, heading: 0.0 };
        let mut ctrl = ControllerState::new();
        let d = lpf_step(0, pose, false, false, &mut ctrl, &view);
        assert_eq!(d.mode, ControllerMode::Wait);
        assert_eq!((d.cmd_left, d.cmd_right), (0.0, 0.0));
    }

    #[test]
    fn lpf_collect_threshold_is_tighter() {
        let arena = Arena::new(ArenaKind::Empty);
        let c = consts();
        let noise = NoiseSource::new(0);
        let positions = vec![(5.0, 7.45)];
        let lost = vec![false];
        let ranges = vec![4.0];
        let networked = vec![true];
        let view = empty_view(&arena, &c, &positions, &lost, &ranges, &networked, &noise);
        let pose = Pose { x: 5.0, y: 7.45, heading: 0.0 };
        let mut ctrl = ControllerState::new();
        // 0.55 m from the nest centre: too far for LPF collection.
        let d = lpf_step(0, pose, false, false, &mut ctrl, &view);
        assert_ne!(d.mode, ControllerMode::Collect);
        let positions2 = vec![(5.0, 7.55)];
        let view2 = empty_view(&arena, &c, &positions2, &lost, &ranges, &networked, &noise);
        let pose2 = Pose { x: 5.0, y: 7.55, heading: 0.0 };
        let d2 = lpf_step(0, pose2, false, false, &mut ctrl, &view2);
        assert_eq!(d2.mode, ControllerMode::Collect);
    }

    #[test]
    fn lpf_explores_when_no_nest_in_range() {
        let arena = Arena::new(ArenaKind::Empty);
        let c = consts();
        let noise = NoiseSource::new(0);
        let positions = vec![(5.0, 3.0)];
        let lost = vec![false];
        let ranges = vec![0.5];
        let networked = vec![true];
        let view = empty_view(&arena, &c, &positions, &lost, &ranges, &networked, &noise);
        let pose = Pose { x: 5.0, y: 3.0, heading: 0.0 };
        let mut ctrl = ControllerState::new();
        let d = lpf_step(0, pose, false, false, &mut ctrl, &view);
        assert_eq!(d.mode, ControllerMode::Explore);
    }

    #[test]
    fn network_roots_at_base_and_respects_emitter_range() {
        let arena = Arena::new(ArenaKind::Empty);
        // Robot 0 inside the base; robot 1 at 2.5 m above the base edge;
        // robot 2 another 2.5 m up but robot 1 only emits to 2 m.
        let positions = vec![(5.0, 1.0), (5.0, 4.5), (5.0, 7.0)];
        let ranges = vec![4.0, 2.0, 4.0];
        let active = vec![true; 3];
        let networked = compute_network(&positions, &ranges, &active, &arena);
        assert!(networked[0]);
        assert!(networked[1]);
        assert!(!networked[2], "hop exceeds the emitting node's 2 m range");
        // With a healthy emitter the chain extends.
        let ranges2 = vec![4.0, 4.0, 4.0];
        let networked2 = compute_network(&positions, &ranges2, &active, &arena);
        assert!(networked2[2]);
    }

    #[test]
    fn network_hop_is_capped_even_with_long_range() {
        let arena = Arena::new(ArenaKind::Empty);
        // 3.5 m gap exceeds the 3 m hop cap regardless of range.
        let positions = vec![(5.0, 1.0), (5.0, 5.6)];
        let ranges = vec![4.0, 4.0];
        let active = vec![true, true];
        let networked = compute_network(&positions, &ranges, &active, &arena);
        assert!(networked[0]);
        assert!(!networked[1]);
    }

    #[test]
    fn full_mesh_is_connected() {
        let arena = Arena::new(ArenaKind::Empty);
        let positions: Vec<(f64, f64)> = (0..6).map(|i| (5.0, 1.0 + i as f64)).collect();
        let ranges = vec![4.0; 6];
        let active = vec![true; 6];
        let networked = compute_network(&positions, &ranges, &active, &arena);
        assert!(networked.iter().all(|&b| b));
        let d = nearest_networked_distance(5, &positions, &networked, &arena);
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collision_resolution_keeps_discs_out_of_walls() {
        let arena = Arena::new(ArenaKind::Constrained);
        let r = 0.15;
        // Driving straight into the wall block at x in [3, 4].
        let resolved = arena.resolve_position((2.7, 4.0), (2.95, 4.0), r, &[]);
        assert!(!arena.penetrates(resolved.0, resolved.1, r));
        assert!(resolved.0 <= 3.0 - r + 1e-9);
        // Bounds clamp.
        let resolved = arena.resolve_position((0.3, 0.3), (-0.5, 0.1), r, &[]);
        assert!(!arena.penetrates(resolved.0, resolved.1, r));
    }

    #[test]
    fn collision_resolution_respects_static_discs() {
        let arena = Arena::new(ArenaKind::Empty);
        let r = 0.15;
        let resolved = arena.resolve_position((5.0, 5.0), (5.0, 5.2), r, &[(5.0, 5.4)]);
        let d = ((resolved.0 - 5.0f64).powi(2) + (resolved.1 - 5.4f64).powi(2)).sqrt();
        assert!(d >= 2.0 * r - 1e-9);
    }
}
