//! Paratope matching kernel.
//!
//! A paratope is a fixed-length, multi-channel, normalised time-series
//! signature of robot behaviour. The matching specificity `m` between two
//! paratopes is obtained by convolving one over the other, summing absolute
//! residuals at each convolution point, thresholding the result, and
//! averaging over convolution points and channels:
//!
//! ```text
//! m(p_i, p_j) = (1/dim) * sum_dim (1/|kappa|) * sum_{o in kappa} G[s - r(o)]
//! ```
//!
//! where `r(o)` is the sum of absolute sample residuals over the overlap at
//! offset `o`, `G(x) = x` for `x > 0` and `0` otherwise, and `kappa` is the
//! offset set `{0, g, 2g, ...}` bounded by `tau = l_i - l_j + k + 1` with the
//! longer paratope first. `k` allows up to that many samples of the shorter
//! paratope to hang over the end of the longer one unpartnered.
//!
//! Residuals are absolute differences. A signed sum would let opposite
//! deviations cancel and score dissimilar shapes as perfect matches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hardware class a paratope describes. Motor paratopes carry three channels
/// (linear velocity, angular velocity, power rate); sensor paratopes carry a
/// single handshake-range channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardwareClass {
    Motor,
    Sensor,
}

impl HardwareClass {
    pub fn dim(self) -> usize {
        match self {
            HardwareClass::Motor => 3,
            HardwareClass::Sensor => 1,
        }
    }
}

impl std::fmt::Display for HardwareClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HardwareClass::Motor => write!(f, "motor"),
            HardwareClass::Sensor => write!(f, "sensor"),
        }
    }
}

/// A normalised behavioural signature: one series of equal length per
/// channel, every sample in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paratope {
    class: HardwareClass,
    channels: Vec<Vec<f64>>,
}

impl Paratope {
    pub fn new(class: HardwareClass, channels: Vec<Vec<f64>>) -> Result<Self> {
        if channels.len() != class.dim() {
            return Err(Error::Domain(format!(
                "{} paratope needs {} channels, got {}",
                class,
                class.dim(),
                channels.len()
            )));
        }
        let len = channels[0].len();
        if len == 0 {
            return Err(Error::Domain("paratope channels must be non-empty".into()));
        }
        for (i, ch) in channels.iter().enumerate() {
            if ch.len() != len {
                return Err(Error::Domain(format!(
                    "channel {i} length {} differs from channel 0 length {len}",
                    ch.len()
                )));
            }
            if let Some(bad) = ch.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain(format!(
                    "channel {i} sample {bad} outside [0, 1]"
                )));
            }
        }
        Ok(Paratope { class, channels })
    }

    pub fn class(&self) -> HardwareClass {
        self.class
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }
}

/// Parameters of the matching kernel: threshold `s`, convolution stride `g`,
/// and maximum unpartnered samples `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    pub s: f64,
    pub g: usize,
    pub k: usize,
}

impl MatchParams {
    pub fn new(s: f64, g: usize, k: usize) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("match threshold s must be > 0, got {s}")));
        }
        if g == 0 {
            return Err(Error::Domain("convolution stride g must be >= 1".into()));
        }
        Ok(MatchParams { s, g, k })
    }

    /// Repertoire membership checks for both X and Y, all hardware classes.
    pub fn membership() -> Self {
        MatchParams { s: 1.5, g: 1, k: 10 }
    }

    /// Paratope against behavioural window, motor class.
    pub fn motor_window() -> Self {
        MatchParams { s: 4.0, g: 5, k: 0 }
    }

    /// Paratope against behavioural window, sensor class.
    pub fn sensor_window() -> Self {
        MatchParams { s: 5.0, g: 5, k: 0 }
    }

    /// Paratope against labelled repertoire entries, motor class.
    pub fn motor_antigen() -> Self {
        MatchParams { s: 1.5, g: 1, k: 10 }
    }

    /// Paratope against labelled repertoire entries, sensor class.
    pub fn sensor_antigen() -> Self {
        MatchParams { s: 3.3, g: 1, k: 10 }
    }
}

/// Sum of absolute residuals between two series when the shorter one is slid
/// `offset` samples to the right over the longer one. The overlap shrinks
/// once the shorter series hangs over the end of the longer.
///
/// Errors if the offset leaves no overlapping samples.
pub fn residual_at_offset(longer: &[f64], shorter: &[f64], offset: usize) -> Result<f64> {
    if offset >= longer.len() {
        return Err(Error::Matching(format!(
            "offset {offset} leaves no overlap (series length {})",
            longer.len()
        )));
    }
    let overlap = shorter.len().min(longer.len() - offset);
    let mut sum = 0.0;
    for n in 0..overlap {
        sum += (longer[offset + n] - shorter[n]).abs();
    }
    Ok(sum)
}

/// Matching specificity between two paratopes of the same hardware class.
///
/// Argument order does not matter: the longer paratope is always treated as
/// the one being convolved over. Result lies in [0, s].
pub fn match_specificity(a: &Paratope, b: &Paratope, params: &MatchParams) -> Result<f64> {
    if a.class() != b.class() {
        return Err(Error::Matching(format!(
            "cannot match {} paratope against {} paratope",
            a.class(),
            b.class()
        )));
    }
    let (longer, shorter) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let tau = longer.len() - shorter.len() + params.k + 1;

    let dim = longer.class().dim();
    let mut total = 0.0;
    for ch in 0..dim {
        let lc = &longer.channels[ch];
        let sc = &shorter.channels[ch];
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut offset = 0usize;
        while offset < tau {
            // Offsets past the end of the longer series have no overlap and
            // cannot be evaluated.
            if offset >= lc.len() {
                break;
            }
            let residual = residual_at_offset(lc, sc, offset)?;
            let gated = params.s - residual;
            if gated > 0.0 {
                acc += gated;
            }
            count += 1;
            offset += params.g;
        }
        if count == 0 {
            return Err(Error::Matching(
                "no valid convolution points for these lengths and parameters".into(),
            ));
        }
        total += acc / count as f64;
    }
    Ok(total / dim as f64)
}

/// Maximum matching specificity of `p` over a repertoire, with the index of
/// the first entry attaining it. Empty repertoires yield `(0.0, None)`.
pub fn best_match<'a, I>(p: &Paratope, repertoire: I, params: &MatchParams) -> Result<(f64, Option<usize>)>
where
    I: IntoIterator<Item = &'a Paratope>,
{
    let mut best = 0.0_f64;
    let mut best_idx = None;
    for (i, candidate) in repertoire.into_iter().enumerate() {
        let m = match_specificity(p, candidate, params)?;
        if best_idx.is_none() || m > best {
            best = m;
            best_idx = Some(i);
        }
    }
    match best_idx {
        Some(i) => Ok((best, Some(i))),
        None => Ok((0.0, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{NoiseSource, Purpose};

    fn sensor(values: Vec<f64>) -> Paratope {
        Paratope::new(HardwareClass::Sensor, vec![values]).unwrap()
    }

    fn random_series(src: &NoiseSource, tag: u32, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| src.uniform(tag, Purpose::InitDegradation, i as u64, 0))
            .collect()
    }

    /// Reference implementation: plain triple loop at stride 1, then keep
    /// only the strided offsets. Kept independent of the production path.
    fn naive_match(a: &Paratope, b: &Paratope, params: &MatchParams) -> f64 {
        let (longer, shorter) = if a.len() >= b.len() { (a, b) } else { (b, a) };
        let tau = longer.len() - shorter.len() + params.k + 1;
        let dim = longer.class().dim();
        let mut per_dim = Vec::new();
        for ch in 0..dim {
            let lc = &longer.channels()[ch];
            let sc = &shorter.channels()[ch];
            let mut values = Vec::new();
            for offset in 0..tau {
                if offset % params.g != 0 || offset >= lc.len() {
                    continue;
                }
                let overlap = sc.len().min(lc.len() - offset);
                let mut residual = 0.0;
                for n in 0..overlap {
                    residual += (lc[offset + n] - sc[n]).abs();
                }
                let g = params.s - residual;
                values.push(if g > 0.0 { g } else { 0.0 });
            }
            per_dim.push(values.iter().sum::<f64>() / values.len() as f64);
        }
        per_dim.iter().sum::<f64>() / dim as f64
    }

    #[test]
    fn identical_channels_have_zero_residual() {
        let v: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
        assert_eq!(residual_at_offset(&v, &v, 0).unwrap(), 0.0);
    }

    #[test]
    fn opposite_constant_channels_have_max_residual() {
        let zeros = vec![0.0; 30];
        let ones = vec![1.0; 30];
        assert_eq!(residual_at_offset(&ones, &zeros, 0).unwrap(), 30.0);
    }

    #[test]
    fn residual_matches_loop_reference_at_offset() {
        let src = NoiseSource::new(11);
        let a = random_series(&src, 0, 40);
        let b = random_series(&src, 1, 30);
        let offset = 3;
        let mut expected = 0.0;
        for n in 0..30 {
            expected += (a[offset + n] - b[n]).abs();
        }
        assert!((residual_at_offset(&a, &b, offset).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_overlap_is_an_error() {
        let a = vec![0.5; 10];
        let b = vec![0.5; 5];
        assert!(residual_at_offset(&a, &b, 10).is_err());
    }

    #[test]
    fn identical_paratopes_with_single_offset_score_s() {
        let p = sensor((0..30).map(|i| i as f64 / 30.0).collect());
        let params = MatchParams { s: 1.5, g: 1, k: 0 };
        let m = match_specificity(&p, &p, &params).unwrap();
        assert!((m - 1.5).abs() < 1e-12);
    }

    #[test]
    fn distant_paratopes_score_zero() {
        let a = Paratope::new(
            HardwareClass::Motor,
            vec![vec![0.0; 30], vec![0.0; 30], vec![0.0; 30]],
        )
        .unwrap();
        let b = Paratope::new(
            HardwareClass::Motor,
            vec![vec![1.0; 30], vec![1.0; 30], vec![1.0; 30]],
        )
        .unwrap();
        // Every offset has residual >= 20 >> s, so G clamps everything to 0.
        let m = match_specificity(&a, &b, &MatchParams { s: 4.0, g: 1, k: 10 }).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn window_sized_match_uses_55_strided_offsets() {
        let src = NoiseSource::new(5);
        let window = sensor(random_series(&src, 0, 300));
        let p = sensor(random_series(&src, 1, 30));
        let params = MatchParams { s: 5.0, g: 5, k: 0 };
        // tau = 300 - 30 + 0 + 1 = 271, strided offsets {0, 5, ..., 270}.
        let mut acc = 0.0;
        let mut count = 0;
        for offset in (0..271).step_by(5) {
            let r = residual_at_offset(&window.channels()[0], &p.channels()[0], offset).unwrap();
            let g = params.s - r;
            acc += if g > 0.0 { g } else { 0.0 };
            count += 1;
        }
        assert_eq!(count, 55);
        let m = match_specificity(&window, &p, &params).unwrap();
        assert!((m - acc / 55.0).abs() < 1e-12);
    }

    #[test]
    fn class_mismatch_is_an_error() {
        let s = sensor(vec![0.5; 30]);
        let m = Paratope::new(
            HardwareClass::Motor,
            vec![vec![0.5; 30], vec![0.5; 30], vec![0.5; 30]],
        )
        .unwrap();
        assert!(match_specificity(&s, &m, &MatchParams::membership()).is_err());
    }

    #[test]
    fn argument_order_does_not_matter() {
        let src = NoiseSource::new(17);
        let long = sensor(random_series(&src, 0, 300));
        let short = sensor(random_series(&src, 1, 30));
        let params = MatchParams::sensor_window();
        let ab = match_specificity(&long, &short, &params).unwrap();
        let ba = match_specificity(&short, &long, &params).unwrap();
        assert_eq!(ab.to_bits(), ba.to_bits());
    }

    #[test]
    fn best_match_empty_repertoire() {
        let p = sensor(vec![0.5; 30]);
        let (m, idx) = best_match(&p, [].iter(), &MatchParams::membership()).unwrap();
        assert_eq!(m, 0.0);
        assert_eq!(idx, None);
    }

    #[test]
    fn best_match_finds_self() {
        let src = NoiseSource::new(23);
        let p = sensor(random_series(&src, 9, 30));
        let others: Vec<Paratope> = (0..4).map(|i| sensor(random_series(&src, i, 30))).collect();
        let mut repertoire = others.clone();
        repertoire.push(p.clone());
        let params = MatchParams { s: 1.5, g: 1, k: 0 };
        let (m, idx) = best_match(&p, repertoire.iter(), &params).unwrap();
        assert!((m - 1.5).abs() < 1e-12);
        assert_eq!(idx, Some(4));
    }

    #[test]
    fn best_match_agrees_with_linear_scan() {
        let src = NoiseSource::new(29);
        let p = sensor(random_series(&src, 100, 30));
        let repertoire: Vec<Paratope> =
            (0..10).map(|i| sensor(random_series(&src, i, 30))).collect();
        let params = MatchParams::sensor_antigen();
        let (m, idx) = best_match(&p, repertoire.iter(), &params).unwrap();
        let mut expected = (0.0_f64, None);
        for (i, cand) in repertoire.iter().enumerate() {
            let v = match_specificity(&p, cand, &params).unwrap();
            if expected.1.is_none() || v > expected.0 {
                expected = (v, Some(i));
            }
        }
        assert_eq!(m.to_bits(), expected.0.to_bits());
        assert_eq!(idx, expected.1);
    }

    #[test]
    fn specificity_agrees_with_naive_reference_across_param_sets() {
        let src = NoiseSource::new(31);
        let param_sets = [
            MatchParams::membership(),
            MatchParams::motor_window(),
            MatchParams::sensor_window(),
            MatchParams::motor_antigen(),
            MatchParams::sensor_antigen(),
        ];
        for case in 0..200 {
            let (la, lb) = if case % 3 == 0 { (300, 30) } else { (30, 30) };
            let a = sensor(random_series(&src, case * 2, la));
            let b = sensor(random_series(&src, case * 2 + 1, lb));
            for params in &param_sets {
                let fast = match_specificity(&a, &b, params).unwrap();
                let naive = naive_match(&a, &b, params);
                assert!(
                    (fast - naive).abs() < 1e-9,
                    "case {case} params {params:?}: {fast} vs {naive}"
                );
            }
        }
    }

    #[test]
    fn replacing_a_channel_with_the_probe_channel_never_decreases_m() {
        let src = NoiseSource::new(37);
        for case in 0..50u32 {
            let mk = |tag: u32| -> Vec<f64> { random_series(&src, tag, 30) };
            let a = Paratope::new(
                HardwareClass::Motor,
                vec![mk(case * 10), mk(case * 10 + 1), mk(case * 10 + 2)],
            )
            .unwrap();
            let b_channels = vec![mk(case * 10 + 3), mk(case * 10 + 4), mk(case * 10 + 5)];
            let b = Paratope::new(HardwareClass::Motor, b_channels.clone()).unwrap();
            let params = MatchParams::motor_antigen();
            let base = match_specificity(&a, &b, &params).unwrap();
            for ch in 0..3 {
                let mut replaced = b_channels.clone();
                replaced[ch] = a.channels()[ch].clone();
                let b2 = Paratope::new(HardwareClass::Motor, replaced).unwrap();
                let m2 = match_specificity(&a, &b2, &params).unwrap();
                assert!(m2 >= base - 1e-12, "case {case} ch {ch}: {m2} < {base}");
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn series(len: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0..=1.0f64, len)
        }

        proptest! {
            #[test]
            fn m_is_bounded_by_s(a in series(30), b in series(30), k in 0usize..12, g in 1usize..6) {
                let pa = Paratope::new(HardwareClass::Sensor, vec![a]).unwrap();
                let pb = Paratope::new(HardwareClass::Sensor, vec![b]).unwrap();
                let params = MatchParams { s: 2.5, g, k };
                let m = match_specificity(&pa, &pb, &params).unwrap();
                prop_assert!(m >= 0.0);
                prop_assert!(m <= params.s + 1e-12);
            }

            #[test]
            fn self_match_is_exactly_s_for_k0_g1(a in series(30)) {
                let p = Paratope::new(HardwareClass::Sensor, vec![a]).unwrap();
                let params = MatchParams { s: 1.5, g: 1, k: 0 };
                let m = match_specificity(&p, &p, &params).unwrap();
                prop_assert!((m - 1.5).abs() < 1e-12);
            }
        }
    }
}
