//! Run configuration: a TOML file with every tunable default, dotted-key
//! overrides, validation, and an echo that reproduces the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{generate_synthetic_gait, load_gait, GaitDesign, GaitError, NominalGait};
use crate::guides::{SwingGains, DEFAULT_MAX_FRACTION, DEFAULT_MIN_FRACTION};
use crate::lip::{PendulumParams, SupportPolygon, Vec2};
use crate::replanner::PlannerSettings;
use crate::sim::map::default_grid;
use crate::sim::{FallThresholds, PatientModel, SimConfig, StepProfiles, Strategy};
use crate::stabilizer::{DcmGains, DEFAULT_WINDUP_BOUND};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config")]
    Parse(#[from] toml::de::Error),
    #[error("bad override '{0}': expected key.path=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Gait(#[from] GaitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitSource {
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSection {
    pub source: GaitSource,
    /// Gait CSV, required when `source = "file"`.
    pub file: Option<PathBuf>,
    pub step_length: f64,
    pub step_width: f64,
    pub step_duration: f64,
    pub double_support_fraction: f64,
    pub sample_period: f64,
    pub cop_sweep: f64,
    pub joint_speed_limit: f64,
}

impl Default for GaitSection {
    fn default() -> Self {
        let d = GaitDesign::default();
        Self {
            source: GaitSource::Synthetic,
            file: None,
            step_length: d.step_length,
            step_width: d.step_width,
            step_duration: d.step_duration,
            double_support_fraction: d.double_support_fraction,
            sample_period: d.sample_period,
            cop_sweep: d.cop_sweep,
            joint_speed_limit: d.joint_speed_limit,
        }
    }
}

impl GaitSection {
    pub fn design(&self) -> GaitDesign {
        GaitDesign {
            step_length: self.step_length,
            step_width: self.step_width,
            step_duration: self.step_duration,
            double_support_fraction: self.double_support_fraction,
            sample_period: self.sample_period,
            cop_sweep: self.cop_sweep,
            joint_speed_limit: self.joint_speed_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatientKind {
    Scripted,
    TangentTorque,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatientSection {
    pub model: PatientKind,
    /// Per-step profiles in text form, cycled over steps, e.g.
    /// `"square:0.5,0.5/square:1.5,0.5"`.
    pub profile: String,
    /// Coupling stiffness α of the tangent-torque wearer.
    pub stiffness: f64,
}

impl Default for PatientSection {
    fn default() -> Self {
        Self {
            model: PatientKind::Scripted,
            profile: "nominal".into(),
            stiffness: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub gravity: f64,
    pub com_height: f64,
    /// Foot rectangle half extents (x, y), m.
    pub foot_half_length: f64,
    pub foot_half_width: f64,
    pub dt: f64,
    pub actuation_lag: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        let p = PendulumParams::default();
        let foot = SupportPolygon::default().half_extents();
        Self {
            gravity: p.gravity(),
            com_height: p.com_height(),
            foot_half_length: foot[0],
            foot_half_width: foot[1],
            dt: 1e-3,
            actuation_lag: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub knots: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub scan_step: f64,
    pub time_tol: f64,
    pub qp_tol: f64,
    pub lock_time: f64,
    pub lock_width: f64,
    pub planning_margin: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let p = PlannerSettings::default();
        let s = SimConfig::default();
        Self {
            knots: p.knots,
            t_min: p.t_min,
            t_max: p.t_max,
            scan_step: p.scan_step,
            time_tol: p.time_tol,
            qp_tol: p.qp_tol,
            lock_time: s.lock_time,
            lock_width: s.lock_width,
            planning_margin: s.planning_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilizerSection {
    /// Diagonals (x, y) of k_p, k_i, k_d.
    pub kp: [f64; 2],
    pub ki: [f64; 2],
    pub kd: [f64; 2],
    pub windup_bound: f64,
}

impl Default for StabilizerSection {
    fn default() -> Self {
        let g = DcmGains::default();
        Self {
            kp: [g.kp()[0], g.kp()[1]],
            ki: [g.ki()[0], g.ki()[1]],
            kd: [g.kd()[0], g.kd()[1]],
            windup_bound: DEFAULT_WINDUP_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidesSection {
    /// Uniform swing PD gains.
    pub kp: f64,
    pub kd: f64,
    pub velocity_min_fraction: f64,
    pub velocity_max_fraction: f64,
    /// Low-pass time constant on σ̇ᵗ, s; absent = no filter.
    pub velocity_filter: Option<f64>,
    pub swing_inertia: f64,
}

impl Default for GuidesSection {
    fn default() -> Self {
        let g = SwingGains::default();
        Self {
            kp: g.kp()[0],
            kd: g.kd()[0],
            velocity_min_fraction: DEFAULT_MIN_FRACTION,
            velocity_max_fraction: DEFAULT_MAX_FRACTION,
            velocity_filter: None,
            swing_inertia: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FallsSection {
    pub saturation_timeout: f64,
    pub terminal_error: f64,
    pub max_step_time: f64,
}

impl Default for FallsSection {
    fn default() -> Self {
        let f = FallThresholds::default();
        Self {
            saturation_timeout: f.saturation_timeout,
            terminal_error: f.terminal_error,
            max_step_time: SimConfig::default().max_step_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub magnitudes: Vec<f64>,
    pub durations: Vec<f64>,
    pub steps: usize,
}

impl Default for MapSection {
    fn default() -> Self {
        let (magnitudes, durations) = default_grid();
        Self {
            magnitudes,
            durations,
            steps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// Recorded corpus CSV; absent = record one from simulated walks.
    pub corpus: Option<PathBuf>,
    pub cases: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            corpus: None,
            cases: 10_000,
        }
    }
}

/// Everything a CLI command depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub steps: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub gait: GaitSection,
    pub patient: PatientSection,
    pub physics: PhysicsSection,
    pub planner: PlannerSection,
    pub stabilizer: StabilizerSection,
    pub guides: GuidesSection,
    pub falls: FallsSection,
    pub map: MapSection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::OnlinePlanning,
            steps: 10,
            seed: 0,
            output_dir: PathBuf::from("out"),
            gait: GaitSection::default(),
            patient: PatientSection::default(),
            physics: PhysicsSection::default(),
            planner: PlannerSection::default(),
            stabilizer: StabilizerSection::default(),
            guides: GuidesSection::default(),
            falls: FallsSection::default(),
            map: MapSection::default(),
            bench: BenchSection::default(),
        }
    }
}

/// Set `a.b.c = value` in a TOML table. The value is parsed as a TOML value
/// when possible (numbers, booleans, arrays) and taken as a string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::Override(assignment.to_string());
    let (key, raw) = assignment.split_once('=').ok_or_else(bad)?;
    let path: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if path.iter().any(|k| k.is_empty()) {
        return Err(bad());
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut node = table;
    for k in parents {
        node = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(bad)?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parse TOML text, apply overrides, validate.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse()?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the optional file, then the overrides.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    /// The exact resolved configuration, reloadable with [`RunConfig::resolve`].
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.gait.source == GaitSource::File && self.gait.file.is_none() {
            return bad("gait.source = \"file\" needs gait.file".into());
        }
        self.patient_model()?;
        if self.map.magnitudes.is_empty() || self.map.durations.is_empty() || self.map.steps == 0 {
            return bad("map grid and step count must be nonempty".into());
        }
        if self
            .map
            .magnitudes
            .iter()
            .chain(&self.map.durations)
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return bad("map magnitudes and durations must be positive".into());
        }
        if self.bench.cases == 0 {
            return bad("bench.cases must be at least 1".into());
        }
        self.sim_config()?;
        Ok(())
    }

    pub fn params(&self) -> Result<PendulumParams, ConfigError> {
        PendulumParams::new(self.physics.gravity, self.physics.com_height)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn foot(&self) -> Result<SupportPolygon, ConfigError> {
        SupportPolygon::new(
            Vec2::zeros(),
            Vec2::new(self.physics.foot_half_length, self.physics.foot_half_width),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        let s = &self.stabilizer;
        let p = &self.planner;
        let cfg = SimConfig {
            params: self.params()?,
            foot: self.foot()?,
            dt: self.physics.dt,
            planner: PlannerSettings {
                knots: p.knots,
                t_min: p.t_min,
                t_max: p.t_max,
                scan_step: p.scan_step,
                time_tol: p.time_tol,
                qp_tol: p.qp_tol,
            },
            dcm_gains: DcmGains::new(s.kp.into(), s.ki.into(), s.kd.into()).map_err(|e| inv(&e))?,
            windup_bound: s.windup_bound,
            actuation_lag: self.physics.actuation_lag,
            swing_gains: SwingGains::uniform(self.guides.kp, self.guides.kd).map_err(|e| inv(&e))?,
            velocity_min_fraction: self.guides.velocity_min_fraction,
            velocity_max_fraction: self.guides.velocity_max_fraction,
            velocity_filter: self.guides.velocity_filter,
            swing_inertia: self.guides.swing_inertia,
            falls: FallThresholds {
                saturation_timeout: self.falls.saturation_timeout,
                terminal_error: self.falls.terminal_error,
            },
            lock_time: p.lock_time,
            lock_width: p.lock_width,
            planning_margin: p.planning_margin,
            max_step_time: self.falls.max_step_time,
            record_trace: false,
            record_planner: false,
        };
        cfg.validate().map_err(|e| inv(&e))?;
        Ok(cfg)
    }

    pub fn patient_model(&self) -> Result<PatientModel, ConfigError> {
        let profiles: StepProfiles = self.patient.profile.parse().map_err(ConfigError::Invalid)?;
        let model = match self.patient.model {
            PatientKind::Scripted => PatientModel::Scripted(profiles),
            PatientKind::TangentTorque => PatientModel::TangentTorque {
                profiles,
                stiffness: self.patient.stiffness,
            },
        };
        if model.is_valid() {
            Ok(model)
        } else {
            Err(ConfigError::Invalid("invalid patient model".into()))
        }
    }

    /// Synthesize or load the gait.
    pub fn build_gait(&self) -> Result<NominalGait, ConfigError> {
        match (&self.gait.source, &self.gait.file) {
            (GaitSource::File, Some(path)) => Ok(load_gait(path)?),
            (GaitSource::File, None) => Err(ConfigError::Invalid("gait.file missing".into())),
            (GaitSource::Synthetic, _) => Ok(generate_synthetic_gait(
                &self.gait.design(),
                &self.params()?,
                &self.foot()?,
            )?),
        }
    }
}
