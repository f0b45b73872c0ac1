//! Stability map over square-wave magnitude × duration.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::falls::FallReason;
use super::patient::{PatientModel, StepProfiles, VelocityProfile};
use super::{run_walk, PreparedGait, SimConfig, SimError, Strategy};
use crate::svg::{heat_map_svg, HeatPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Stable,
    Fallen,
    /// The profile would push the abscissa past `L_max` (not simulated).
    Infeasible,
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Stable => "stable",
            CellStatus::Fallen => "fallen",
            CellStatus::Infeasible => "infeasible",
        }
    }

    fn color(&self) -> &'static str {
        match self {
            CellStatus::Stable => "#3a9d23",
            CellStatus::Fallen => "#d62728",
            CellStatus::Infeasible => "#ffffff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapCell {
    pub magnitude: f64,
    pub duration: f64,
    pub status: CellStatus,
    pub falls: usize,
    pub reason: FallReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    pub strategy: Strategy,
    pub magnitudes: Vec<f64>,
    pub durations: Vec<f64>,
    /// Row-major: `cells[i * durations.len() + j]` for magnitude `i`, duration `j`.
    pub cells: Vec<MapCell>,
}

impl StabilityMap {
    pub fn cell(&self, magnitude_index: usize, duration_index: usize) -> &MapCell {
        &self.cells[magnitude_index * self.durations.len() + duration_index]
    }

    pub fn stable_count(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Stable).count()
    }

    /// Every cell stable here is stable in `other`, and `other` has more.
    pub fn strictly_contained_in(&self, other: &StabilityMap) -> bool {
        self.cells.len() == other.cells.len()
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.status != CellStatus::Stable || b.status == CellStatus::Stable)
            && other.stable_count() > self.stable_count()
    }
}

/// One `steps`-step walk per (magnitude, duration) cell, in parallel.
pub fn stability_map(
    gait: &PreparedGait,
    strategy: Strategy,
    magnitudes: &[f64],
    durations: &[f64],
    steps: usize,
    config: &SimConfig,
) -> Result<StabilityMap, SimError> {
    if magnitudes.is_empty() || durations.is_empty() {
        return Err(SimError::Invalid("stability grid must be nonempty".into()));
    }
    let mut config = config.clone();
    config.record_trace = false;
    config.record_planner = false;
    config.validate()?;
    let t_ss = gait.single_support_duration();
    let grid: Vec<(f64, f64)> = magnitudes
        .iter()
        .flat_map(|m| durations.iter().map(move |d| (*m, *d)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(magnitude, duration)| {
            let profile = VelocityProfile::square(magnitude, duration);
            if profile.overshoots(t_ss) {
                return Ok(MapCell {
                    magnitude,
                    duration,
                    status: CellStatus::Infeasible,
                    falls: 0,
                    reason: FallReason::None,
                });
            }
            let patient = PatientModel::Scripted(StepProfiles::uniform(profile));
            let walk = run_walk(gait, strategy, &patient, steps, &config)?;
            let fallen = walk.steps.iter().find(|s| !s.stable());
            Ok(MapCell {
                magnitude,
                duration,
                status: if fallen.is_some() {
                    CellStatus::Fallen
                } else {
                    CellStatus::Stable
                },
                falls: walk.falls(),
                reason: fallen.map(|s| s.fall_reason).unwrap_or(FallReason::None),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(StabilityMap {
        strategy,
        magnitudes: magnitudes.to_vec(),
        durations: durations.to_vec(),
        cells,
    })
}

/// CSV with one row per cell of every map.
pub fn write_map_csv<W: Write>(maps: &[&StabilityMap], writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| std::io::Error::other(e);
    w.write_record(["strategy", "magnitude", "duration", "status", "reason"])
        .map_err(io)?;
    for m in maps {
        for c in &m.cells {
            w.write_record([
                m.strategy.label().to_string(),
                c.magnitude.to_string(),
                c.duration.to_string(),
                c.status.label().to_string(),
                c.reason.label().to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()
}

/// Side-by-side panels: magnitude rows (bottom to top), duration columns.
pub fn map_svg(maps: &[&StabilityMap]) -> String {
    let panels: Vec<HeatPanel> = maps
        .iter()
        .map(|m| HeatPanel {
            title: match m.strategy {
                Strategy::TimeRescaling => "Time rescaling".into(),
                Strategy::OnlinePlanning => "Online planning".into(),
            },
            row_labels: m.magnitudes.iter().map(|v| format!("{:.0}%", v * 100.0)).collect(),
            col_labels: m.durations.iter().map(|v| format!("{:.0}", v * 1000.0)).collect(),
            row_axis: "magnitude".into(),
            col_axis: "duration (ms)".into(),
            cells: (0..m.magnitudes.len())
                .map(|i| (0..m.durations.len()).map(|j| m.cell(i, j).status.color()).collect())
                .collect(),
        })
        .collect();
    heat_map_svg(&panels)
}

/// Default grid: 50%–130% in 10% steps, 100–900 ms in 100 ms steps.
pub fn default_grid() -> (Vec<f64>, Vec<f64>) {
    let mags = (5..=13).map(|i| i as f64 / 10.0).collect();
    let durs = (1..=9).map(|i| i as f64 / 10.0).collect();
    (mags, durs)
}
