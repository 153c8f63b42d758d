//! Counter-based deterministic random streams.
//!
//! Every random draw in a run is addressed by `(robot, purpose, tick, index)`
//! and hashed together with the run seed, so adding robots or toggling a
//! subsystem never perturbs the draws of another stream. The generator is a
//! splitmix64 finalizer chain, which is stable across platforms and needs no
//! carried state.

/// Identifies which subsystem a draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    VelLeft = 1,
    VelRight = 2,
    PowerLeft = 3,
    PowerRight = 4,
    PowerBackground = 5,
    Range = 6,
    DegradeLeft = 7,
    DegradeRight = 8,
    DegradeSensor = 9,
    ExploreHeading = 10,
    InitDegradation = 11,
    InitProbability = 12,
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless source of keyed random streams for one run.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource { seed }
    }

    fn raw(&self, robot: u32, purpose: Purpose, tick: u64, index: u32) -> u64 {
        let mut x = splitmix64(self.seed ^ 0x51ab_2ce1_9fd4_77u64);
        x = splitmix64(x ^ u64::from(robot).wrapping_add(1));
        x = splitmix64(x ^ purpose as u64);
        x = splitmix64(x ^ tick);
        splitmix64(x ^ u64::from(index))
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn uniform(&self, robot: u32, purpose: Purpose, tick: u64, index: u32) -> f64 {
        let bits = self.raw(robot, purpose, tick, index);
        ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw via Box-Muller on two keyed uniforms.
    pub fn std_normal(&self, robot: u32, purpose: Purpose, tick: u64) -> f64 {
        let u1 = self.uniform(robot, purpose, tick, 0);
        let u2 = self.uniform(robot, purpose, tick, 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
