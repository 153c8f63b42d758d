//! Experiment logs and run summaries.
//!
//! A log holds one record per robot per tick, written as CSV with a fixed
//! header. Floats are printed with the shortest representation that parses
//! back to the identical value, so a written log re-read from disk feeds the
//! offline engine byte-for-byte the same samples the live run saw.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use crate::behavior::ControllerMode;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::matching::HardwareClass;
use crate::repertoire::DiagnosisCategory;

/// Fixed CSV header.
pub const CSV_HEADER: &str = "tick,time_s,robot,pos_x,pos_y,heading,d_left,d_right,d_sensor,power,v,omega,dp,gamma,v_norm,omega_norm,dp_norm,gamma_norm,mode,moving,carrying,detected_motor,detected_sensor,diagnosis";

/// One robot, one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub time_s: f64,
    pub robot: u32,
    pub pos_x: f64,
    pub pos_y: f64,
    pub heading: f64,
    pub d_left: f64,
    pub d_right: f64,
    pub d_sensor: f64,
    pub power: f64,
    pub v: f64,
    pub omega: f64,
    pub dp: f64,
    pub gamma: f64,
    pub v_norm: f64,
    pub omega_norm: f64,
    pub dp_norm: f64,
    pub gamma_norm: f64,
    pub mode: ControllerMode,
    pub moving: bool,
    pub carrying: bool,
    pub detected_motor: bool,
    pub detected_sensor: bool,
    pub diagnosis: Option<DiagnosisCategory>,
}

impl TickRecord {
    fn to_csv_line(&self, out: &mut String) {
        use std::fmt::Write as _;
        let diag = self.diagnosis.map(|d| d.to_string()).unwrap_or_default();
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.tick,
            self.time_s,
            self.robot,
            self.pos_x,
            self.pos_y,
            self.heading,
            self.d_left,
            self.d_right,
            self.d_sensor,
            self.power,
            self.v,
            self.omega,
            self.dp,
            self.gamma,
            self.v_norm,
            self.omega_norm,
            self.dp_norm,
            self.gamma_norm,
            self.mode,
            self.moving as u8,
            self.carrying as u8,
            self.detected_motor as u8,
            self.detected_sensor as u8,
            diag,
        );
        out.push('\n');
    }

    fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 24 {
            return Err(Error::Io(format!("expected 24 CSV fields, got {}", fields.len())));
        }
        let f64_at = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::Io(format!("field {i} '{}': {e}", fields[i])))
        };
        let bool_at = |i: usize| -> Result<bool> {
            match fields[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Io(format!("field {i} '{other}' is not a 0/1 flag"))),
            }
        };
        let diagnosis = if fields[23].is_empty() {
            None
        } else {
            Some(match fields[23] {
                "both_motors" => DiagnosisCategory::BothMotors,
                "left_motor" => DiagnosisCategory::LeftMotor,
                "right_motor" => DiagnosisCategory::RightMotor,
                "false_positive" => DiagnosisCategory::FalsePositive,
                "sensor_fault" => DiagnosisCategory::SensorFault,
                "unlabeled" => DiagnosisCategory::Unlabeled,
                other => return Err(Error::Io(format!("unknown diagnosis token {other}"))),
            })
        };
        Ok(TickRecord {
            tick: fields[0].parse().map_err(|e| Error::Io(format!("tick: {e}")))?,
            time_s: f64_at(1)?,
            robot: fields[2].parse().map_err(|e| Error::Io(format!("robot: {e}")))?,
            pos_x: f64_at(3)?,
            pos_y: f64_at(4)?,
            heading: f64_at(5)?,
            d_left: f64_at(6)?,
            d_right: f64_at(7)?,
            d_sensor: f64_at(8)?,
            power: f64_at(9)?,
            v: f64_at(10)?,
            omega: f64_at(11)?,
            dp: f64_at(12)?,
            gamma: f64_at(13)?,
            v_norm: f64_at(14)?,
            omega_norm: f64_at(15)?,
            dp_norm: f64_at(16)?,
            gamma_norm: f64_at(17)?,
            mode: fields[18].parse()?,
            moving: bool_at(19)?,
            carrying: bool_at(20)?,
            detected_motor: bool_at(21)?,
            detected_sensor: bool_at(22)?,
            diagnosis,
        })
    }
}

/// Append-only per-tick record of a whole run, tick-major then robot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentLog {
    pub n_robots: usize,
    pub n_ticks: u64,
    records: Vec<TickRecord>,
}

impl ExperimentLog {
    pub fn new(n_robots: usize) -> Self {
        ExperimentLog { n_robots, n_ticks: 0, records: Vec::new() }
    }

    /// Append the records of one tick, one per robot in index order.
    pub fn push_tick(&mut self, tick: u64, records: Vec<TickRecord>) {
        debug_assert_eq!(records.len(), self.n_robots);
        debug_assert_eq!(tick, self.n_ticks + 1);
        self.n_ticks = tick;
        self.records.extend(records);
    }

    /// Record for a 1-based tick and robot index.
    pub fn record(&self, tick: u64, robot: usize) -> &TickRecord {
        &self.records[(tick as usize - 1) * self.n_robots + robot]
    }

    pub fn records(&self) -> &[TickRecord] {
        &self.records
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 120 + CSV_HEADER.len() + 1);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for rec in &self.records {
            rec.to_csv_line(&mut out);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(file);
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut lines = std::io::BufReader::new(file).lines();
        match lines.next() {
            Some(Ok(header)) if header == CSV_HEADER => {}
            Some(Ok(other)) => {
                return Err(Error::Io(format!("unexpected CSV header: {other}")));
            }
            _ => return Err(Error::Io("empty log file".into())),
        }
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            records.push(TickRecord::from_csv_line(&line)?);
        }
        if records.is_empty() {
            return Err(Error::Io("log contains no records".into()));
        }
        let n_robots = records.iter().map(|r| r.robot).max().unwrap() as usize + 1;
        let n_ticks = records.last().unwrap().tick;
        if records.len() != n_robots * n_ticks as usize {
            return Err(Error::Io(format!(
                "log has {} records, expected {} robots x {} ticks",
                records.len(),
                n_robots,
                n_ticks
            )));
        }
        for (i, rec) in records.iter().enumerate() {
            let expect_tick = (i / n_robots) as u64 + 1;
            let expect_robot = (i % n_robots) as u32;
            if rec.tick != expect_tick || rec.robot != expect_robot {
                return Err(Error::Io(format!(
                    "record {i} out of order: tick {} robot {}",
                    rec.tick, rec.robot
                )));
            }
        }
        Ok(ExperimentLog { n_robots, n_ticks, records })
    }
}

/// A resource deposited at the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepositEvent {
    pub tick: u64,
    pub robot: u32,
}

/// A robot that depleted its power outside the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LostEvent {
    pub tick: u64,
    pub robot: u32,
}

/// A detection raised during the run, by the oracle (class absent) or by
/// the population model (class present).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub tick: u64,
    pub time_s: f64,
    pub robot: u32,
    pub class: Option<HardwareClass>,
    /// Smallest relevant degradation coefficient at the detection instant.
    pub delta: f64,
    pub diagnosis: Option<DiagnosisCategory>,
}

pub const SUMMARY_VERSION: u32 = 1;

fn default_summary_version() -> u32 {
    SUMMARY_VERSION
}

/// Per-run summary written alongside the CSV log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(default = "default_summary_version")]
    pub version: u32,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub replicate: u32,
    pub n_ticks: u64,
    pub resources_collected: u64,
    pub deposits: Vec<DepositEvent>,
    pub lost: Vec<LostEvent>,
    pub detections: Vec<DetectionRecord>,
    pub recharges: u32,
    pub repairs: u32,
    /// Total power drawn by the swarm over the run.
    pub power_consumed: f64,
    /// Total power restored by base recharges.
    pub power_recharged: f64,
    /// Final degradation coefficients per robot: [left, right, sensor].
    pub final_deg: Vec<[f64; 3]>,
    /// Final power per robot (null for unlimited budgets).
    pub final_power: Vec<Option<f64>>,
}

impl RunSummary {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Sidecar summary path for a log file: `rep_000.csv` -> `rep_000.summary.json`.
pub fn summary_path_for(log_path: &Path) -> std::path::PathBuf {
    let stem = log_path.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
    log_path.with_file_name(format!("{stem}.summary.json"))
}
