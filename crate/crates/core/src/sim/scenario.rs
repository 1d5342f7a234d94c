//! Scenario files: TOML with start/goal, sensor, map, planner, simulation and
//! obstacle sections. Any key may be overridden with a `dotted.path=value`
//! pair before the file is deserialized.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::env::{Environment, Obstacle};
use super::sensor::SensorModel;
use crate::error::{CoreError, Result};
use crate::geometry::Vec3;
use crate::gridmap::LogOddsParams;
use crate::planner::PlannerConfig;
use crate::spatial::MapConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Start {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Planning latency budget; the replan handover is this far ahead.
    pub plan_budget: f64,
    /// Ground-truth collision when the signed distance drops below this.
    pub body_radius: f64,
    /// First-order tracking lag time constant; 0 tracks exactly.
    pub tracking_lag: f64,
    /// Hovering longer than this without a plan ends the run.
    pub hover_timeout: f64,
    /// Frames between planning retries while hovering.
    pub retry_every: usize,
    /// Cell size of the coarse seen-space record used to flag plans through
    /// never-scanned space.
    pub seen_cell: f64,
    /// Every how many rays of a scan feed the seen-space record.
    pub seen_ray_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            plan_budget: 0.03,
            body_radius: 0.0,
            tracking_lag: 0.0,
            hover_timeout: 3.0,
            retry_every: 10,
            seen_cell: 0.5,
            seen_ray_stride: 8,
        }
    }
}

/// Static-sensor comparison between the occupancy grid and the point-cloud map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Name of the capsule obstacle playing the bar.
    pub bar: String,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<f64>,
    #[serde(default)]
    pub grid: LogOddsParams,
    /// Obstacles dropped for the no-backdrop ablation.
    #[serde(default)]
    pub backdrop: Vec<String>,
}

fn default_frames() -> usize {
    50
}

fn default_resolutions() -> Vec<f64> {
    vec![0.3, 0.2, 0.1, 0.05]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Simulated seconds before the run times out.
    pub duration: f64,
    pub start: Start,
    pub goal: Goal,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl Scenario {
    /// Reads, overrides, parses and validates a scenario file.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::Scenario {
            origin: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml(&text, &path.display().to_string(), overrides)
    }

    /// `origin` names the source in error messages.
    pub fn from_toml(text: &str, origin: &str, overrides: &[String]) -> Result<Self> {
        let err = |msg: String| CoreError::Scenario {
            origin: origin.to_string(),
            msg,
        };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| err(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o).map_err(err)?;
        }
        let scenario: Scenario = if overrides.is_empty() {
            // parse the original text so errors carry its line numbers
            toml::from_str(text).map_err(|e| err(e.to_string()))?
        } else {
            table.try_into().map_err(|e: toml::de::Error| err(e.to_string()))?
        };
        scenario.validate().map_err(|e| err(e.to_string()))?;
        Ok(scenario)
    }

    pub fn environment(&self) -> Environment {
        Environment::new(self.obstacles.clone())
    }

    pub fn start_position(&self) -> Vec3 {
        Vec3::from(self.start.position)
    }

    pub fn goal_position(&self) -> Vec3 {
        Vec3::from(self.goal.position)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::InvalidArgument(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        self.sensor.validate()?;
        self.map.validate()?;
        self.planner.validate()?;
        if self.planner.clearance != self.map.clearance {
            return bad(format!(
                "planner.clearance ({}) and map.clearance ({}) must agree",
                self.planner.clearance, self.map.clearance
            ));
        }
        let s = &self.sim;
        if !(s.plan_budget >= 0.0 && s.body_radius >= 0.0 && s.tracking_lag >= 0.0) {
            return bad("sim: plan_budget, body_radius and tracking_lag must be >= 0".into());
        }
        if !(s.hover_timeout > 0.0 && s.seen_cell > 0.0) || s.retry_every == 0 || s.seen_ray_stride == 0 {
            return bad("sim: hover_timeout, seen_cell, retry_every and seen_ray_stride must be positive".into());
        }
        let env = self.environment();
        env.validate()?;
        for (i, o) in self.obstacles.iter().enumerate() {
            if !o.name.is_empty() && self.obstacles[..i].iter().any(|p| p.name == o.name) {
                return bad(format!("duplicate obstacle name '{}'", o.name));
            }
        }
        let start = self.start_position();
        let goal = self.goal_position();
        if !start.iter().chain(goal.iter()).all(|c| c.is_finite()) {
            return bad("start and goal must be finite".into());
        }
        if let Some((d, i)) = env.at(0.0).min_distance(&start) {
            if d <= s.body_radius {
                return bad(format!(
                    "start lies inside obstacle {i} ('{}')",
                    self.obstacles[i].name
                ));
            }
        }
        if let Some(ws) = &self.planner.workspace {
            if !ws.contains(&start) || !ws.contains(&goal) {
                return bad("start and goal must lie inside planner.workspace".into());
            }
        }
        if let Some(c) = &self.compare {
            let Some(i) = env.index_of(&c.bar) else {
                return bad(format!("compare.bar names unknown obstacle '{}'", c.bar));
            };
            if !matches!(self.obstacles[i].shape, super::env::Shape::Capsule { .. }) {
                return bad("compare.bar must be a capsule".into());
            }
            for b in &c.backdrop {
                if env.index_of(b).is_none() {
                    return bad(format!("compare.backdrop names unknown obstacle '{b}'"));
                }
            }
            if c.frames == 0 || c.resolutions.is_empty() || c.resolutions.iter().any(|r| !(*r > 0.0)) {
                return bad("compare needs frames >= 1 and positive resolutions".into());
            }
            c.grid.validate()?;
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` in `table`; the value is parsed as a TOML value and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> std::result::Result<(), String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override '{assignment}' is not of the form key=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(format!("override '{assignment}' has an empty key"));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("override '{path}': '{k}' is not a table"))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
