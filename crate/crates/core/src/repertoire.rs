//! Behavioural sampling and repertoire management.
//!
//! Each robot writes normalised telemetry to rolling behavioural windows at
//! 6 Hz, one window per hardware class. Every five seconds the most recent
//! 30 samples are extracted as a candidate paratope. Candidates enter the
//! robot's private repertoire X only if no existing member matches them above
//! the membership threshold `u`; the same rule governs the swarm-shared
//! labelled repertoire Y.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{match_specificity, HardwareClass, MatchParams, Paratope};
use crate::robot::PhysicalConstants;

/// Samples per behavioural window (50 s at 6 Hz).
pub const WINDOW_CAPACITY: usize = 300;
/// Samples per paratope (5 s at 6 Hz).
pub const PARATOPE_LEN: usize = 30;
/// Telemetry sampling rate, Hz.
pub const SAMPLE_RATE_HZ: f64 = 6.0;
/// Membership threshold: a candidate is discarded if it matches an existing
/// entry with m > u under the membership parameters.
pub const MEMBERSHIP_U: f64 = 1.2;

/// Telemetry channels feeding the two hardware classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    LinearVelocity,
    AngularVelocity,
    PowerRate,
    HandshakeRange,
}

/// Map a raw physical value onto the normalised [0, 1] paratope axis.
///
/// Angular velocity maps zero to 0.5 so the turn direction flips the trace
/// about the midline; the extremes correspond to wheels opposed at maximum
/// velocity. All channels clamp, so sensor noise cannot escape the axis.
pub fn normalize_channel(raw: f64, channel: Channel, c: &PhysicalConstants) -> f64 {
    let value = match channel {
        Channel::LinearVelocity => raw / c.v_max,
        Channel::AngularVelocity => 0.5 + raw * c.axle / (4.0 * c.v_max),
        Channel::PowerRate => raw / c.dp_max,
        Channel::HandshakeRange => raw / c.r_max,
    };
    value.clamp(0.0, 1.0)
}

/// Rolling record of the most recent [`WINDOW_CAPACITY`] normalised samples
/// per channel.
#[derive(Debug, Clone)]
pub struct BehaviouralWindow {
    class: HardwareClass,
    channels: Vec<VecDeque<f64>>,
}

impl BehaviouralWindow {
    pub fn new(class: HardwareClass) -> Self {
        let channels = (0..class.dim())
            .map(|_| VecDeque::with_capacity(WINDOW_CAPACITY))
            .collect();
        BehaviouralWindow { class, channels }
    }

    pub fn class(&self) -> HardwareClass {
        self.class
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == WINDOW_CAPACITY
    }

    /// Append one sample per channel, evicting the oldest when full.
    /// Out-of-range values are rejected: normalisation happens upstream.
    pub fn push_sample(&mut self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.channels.len() {
            return Err(Error::Domain(format!(
                "expected {} channel values, got {}",
                self.channels.len(),
                sample.len()
            )));
        }
        for &v in sample {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("window sample {v} outside [0, 1]")));
            }
        }
        for (ch, &v) in self.channels.iter_mut().zip(sample) {
            if ch.len() == WINDOW_CAPACITY {
                ch.pop_front();
            }
            ch.push_back(v);
        }
        Ok(())
    }

    /// Full-window snapshot as a paratope-shaped series for matching.
    pub fn snapshot(&self) -> Paratope {
        let channels = self.channels.iter().map(|ch| ch.iter().copied().collect()).collect();
        Paratope::new(self.class, channels).expect("window samples stay in range")
    }

    /// The most recent [`PARATOPE_LEN`] samples as a paratope, or `None` if
    /// not enough samples have accumulated yet.
    pub fn extract_paratope(&self) -> Option<Paratope> {
        if self.len() < PARATOPE_LEN {
            return None;
        }
        let channels = self
            .channels
            .iter()
            .map(|ch| ch.iter().skip(ch.len() - PARATOPE_LEN).copied().collect())
            .collect();
        Some(Paratope::new(self.class, channels).expect("window samples stay in range"))
    }
}

/// An antibody population: a paratope with a scalar population level.
#[derive(Debug, Clone)]
pub struct AntibodyPopulation {
    pub paratope: Paratope,
    pub level: f64,
    pub created_at: f64,
}

/// Diagnosis category attached to labelled paratopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisCategory {
    BothMotors,
    LeftMotor,
    RightMotor,
    FalsePositive,
    SensorFault,
    Unlabeled,
}

impl std::fmt::Display for DiagnosisCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let token = match self {
            DiagnosisCategory::BothMotors => "both_motors",
            DiagnosisCategory::LeftMotor => "left_motor",
            DiagnosisCategory::RightMotor => "right_motor",
            DiagnosisCategory::FalsePositive => "false_positive",
            DiagnosisCategory::SensorFault => "sensor_fault",
            DiagnosisCategory::Unlabeled => "unlabeled",
        };
        write!(f, "{token}")
    }
}

/// A paratope labelled as faulty, with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledParatope {
    pub paratope: Paratope,
    pub category: DiagnosisCategory,
    /// Model-order generation that produced this entry (>= 1).
    pub order: u32,
    pub source_robot: u32,
    pub source_time: f64,
}

/// Outcome of a repertoire membership check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    Added,
    /// Index of the existing entry whose match exceeded `u`.
    Discarded(usize),
}

fn check_membership<'a, I>(
    candidate: &Paratope,
    existing: I,
    params: &MatchParams,
    u: f64,
) -> Result<Option<usize>>
where
    I: IntoIterator<Item = &'a Paratope>,
{
    for (i, entry) in existing.into_iter().enumerate() {
        if match_specificity(candidate, entry, params)? > u {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// A robot's private repertoire X of antibody populations.
#[derive(Debug, Clone)]
pub struct PopulationRepertoire {
    class: HardwareClass,
    pub entries: Vec<AntibodyPopulation>,
}

impl PopulationRepertoire {
    pub fn new(class: HardwareClass) -> Self {
        PopulationRepertoire { class, entries: Vec::new() }
    }

    pub fn class(&self) -> HardwareClass {
        self.class
    }

    /// Add `candidate` unless an existing member matches it above `u`.
    /// New populations start at level zero.
    pub fn try_add(&mut self, candidate: Paratope, created_at: f64) -> Result<AddOutcome> {
        if candidate.class() != self.class {
            return Err(Error::Domain(format!(
                "cannot add {} paratope to {} repertoire",
                candidate.class(),
                self.class
            )));
        }
        let params = MatchParams::membership();
        match check_membership(
            &candidate,
            self.entries.iter().map(|e| &e.paratope),
            &params,
            MEMBERSHIP_U,
        )? {
            Some(i) => Ok(AddOutcome::Discarded(i)),
            None => {
                self.entries.push(AntibodyPopulation {
                    paratope: candidate,
                    level: 0.0,
                    created_at,
                });
                Ok(AddOutcome::Added)
            }
        }
    }
}

/// The swarm-shared repertoire Y of paratopes labelled faulty.
#[derive(Debug, Clone)]
pub struct LabeledRepertoire {
    class: HardwareClass,
    pub entries: Vec<LabeledParatope>,
}

/// On-disk document for a labelled repertoire.
#[derive(Serialize, Deserialize)]
struct LabeledRepertoireDoc {
    version: u32,
    hardware_class: HardwareClass,
    match_params: MatchParams,
    entries: Vec<LabeledEntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct LabeledEntryDoc {
    values: Vec<Vec<f64>>,
    category: DiagnosisCategory,
    order: u32,
    source_robot: u32,
    source_time: f64,
}

const REPERTOIRE_DOC_VERSION: u32 = 1;

impl LabeledRepertoire {
    pub fn new(class: HardwareClass) -> Self {
        LabeledRepertoire { class, entries: Vec::new() }
    }

    pub fn class(&self) -> HardwareClass {
        self.class
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn paratopes(&self) -> impl Iterator<Item = &Paratope> {
        self.entries.iter().map(|e| &e.paratope)
    }

    pub fn try_add(&mut self, candidate: LabeledParatope) -> Result<AddOutcome> {
        if candidate.paratope.class() != self.class {
            return Err(Error::Domain(format!(
                "cannot add {} paratope to {} repertoire",
                candidate.paratope.class(),
                self.class
            )));
        }
        let params = MatchParams::membership();
        match check_membership(&candidate.paratope, self.paratopes(), &params, MEMBERSHIP_U)? {
            Some(i) => Ok(AddOutcome::Discarded(i)),
            None => {
                self.entries.push(candidate);
                Ok(AddOutcome::Added)
            }
        }
    }

    /// Merge additions collected from several robots into the shared store.
    /// Additions are applied in (source robot, source time) order so every
    /// robot observes the same repertoire afterwards.
    pub fn merge(&mut self, mut additions: Vec<LabeledParatope>) -> Result<usize> {
        additions.sort_by(|a, b| {
            (a.source_robot, a.source_time)
                .partial_cmp(&(b.source_robot, b.source_time))
                .expect("source times are finite")
        });
        let mut added = 0;
        for candidate in additions {
            if matches!(self.try_add(candidate)?, AddOutcome::Added) {
                added += 1;
            }
        }
        Ok(added)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LabeledRepertoireDoc {
            version: REPERTOIRE_DOC_VERSION,
            hardware_class: self.class,
            match_params: MatchParams::membership(),
            entries: self
                .entries
                .iter()
                .map(|e| LabeledEntryDoc {
                    values: e.paratope.channels().to_vec(),
                    category: e.category,
                    order: e.order,
                    source_robot: e.source_robot,
                    source_time: e.source_time,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LabeledRepertoireDoc = serde_json::from_str(text)?;
        if doc.version != REPERTOIRE_DOC_VERSION {
            return Err(Error::Io(format!(
                "unsupported repertoire document version {}",
                doc.version
            )));
        }
        let mut entries = Vec::with_capacity(doc.entries.len());
        for e in doc.entries {
            entries.push(LabeledParatope {
                paratope: Paratope::new(doc.hardware_class, e.values)?,
                category: e.category,
                order: e.order,
                source_robot: e.source_robot,
                source_time: e.source_time,
            });
        }
        Ok(LabeledRepertoire { class: doc.hardware_class, entries })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
