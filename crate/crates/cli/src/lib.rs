//! Runs scenarios, benchmarks the per-frame stages and drives the
//! occupancy-grid comparison. The `pcavoid` binary is a thin layer on top.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use pcavoid_core::gridmap::{thin_object_experiment, ThinObjectReport, ThinObjectSetup};
use pcavoid_core::sim::{level_pose, simulate, Environment, Outcome, RunLog, Scenario};
use pcavoid_core::{CoreError, PointCloud};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and validates a scenario, with an optional seed override.
pub fn load_scenario(path: &Path, seed: Option<u64>, overrides: &[String]) -> Result<Scenario> {
    let mut all = overrides.to_vec();
    if let Some(s) = seed {
        all.push(format!("seed={s}"));
    }
    Ok(Scenario::load(path, &all)?)
}

/// min / mean / p95 / max of one stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageStats {
    pub count: usize,
    pub min_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl StageStats {
    pub fn from_seconds(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut ms: Vec<f64> = samples.iter().map(|s| s * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        // nearest-rank percentile
        let rank = ((0.95 * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
        Self {
            count: ms.len(),
            min_ms: ms[0],
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            p95_ms: ms[rank - 1],
            max_ms: ms[ms.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstacleDistance {
    pub name: String,
    pub min_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub exit_code: i32,
    pub replan_count: usize,
    pub plan_count: usize,
    /// Ground truth, excluding planner-failure hover.
    pub min_clearance: f64,
    pub obstacles: Vec<ObstacleDistance>,
    pub path_length: f64,
    pub flight_time: f64,
    pub map_update: StageStats,
    pub tree_build: StageStats,
    pub plan: StageStats,
    pub scan: StageStats,
}

impl RunReport {
    pub fn new(scenario: &Scenario, log: &RunLog) -> Self {
        Self {
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            outcome: log.outcome,
            exit_code: log.outcome.exit_code(),
            replan_count: log.replan_count,
            plan_count: log.plan_count,
            min_clearance: log.min_clearance,
            obstacles: scenario
                .obstacles
                .iter()
                .zip(&log.min_distance_per_obstacle)
                .map(|(o, d)| ObstacleDistance {
                    name: o.name.clone(),
                    min_distance: *d,
                })
                .collect(),
            path_length: log.path_length,
            flight_time: log.flight_time,
            map_update: StageStats::from_seconds(&log.timings.map_update),
            tree_build: StageStats::from_seconds(&log.timings.tree_build),
            plan: StageStats::from_seconds(&log.timings.plan),
            scan: StageStats::from_seconds(&log.timings.scan),
        }
    }

    pub fn min_distance_to(&self, name: &str) -> Option<f64> {
        self.obstacles
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.min_distance)
    }
}

/// Simulates `scenario` and writes its outputs into `out_dir`:
///
/// - `events.log`: deterministic event log
/// - `trace.csv`: per-frame UAV state and ground-truth clearance
/// - `trajectory.csv`: the final tracked trajectory sampled at 20 ms
/// - `snapshots/frame_<n>_tree_<i>.txt`: the local map at each plan
/// - `timings.csv`: per-invocation stage wall times
/// - `report.json`: the run summary
///
/// The scenario is validated before anything is written.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<(RunReport, RunLog)> {
    scenario.validate()?;
    let log = simulate(scenario)?;
    let report = RunReport::new(scenario, &log);

    mkdir(out_dir)?;
    write(&out_dir.join("events.log"), log.event_text())?;
    write(&out_dir.join("trace.csv"), log.trace_csv())?;
    if let Some(traj) = &log.trajectory {
        let mut csv = String::from("t,px,py,pz,vx,vy,vz,ax,ay,az\n");
        for s in traj.sample(0.02)? {
            let _ = writeln!(
                csv,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                s.t, s.p.x, s.p.y, s.p.z, s.v.x, s.v.y, s.v.z, s.a.x, s.a.y, s.a.z
            );
        }
        write(&out_dir.join("trajectory.csv"), csv)?;
    }
    let snap_dir = out_dir.join("snapshots");
    mkdir(&snap_dir)?;
    for snap in &log.snapshots {
        for (i, tree) in snap.trees.iter().enumerate() {
            let cloud = PointCloud::new(tree.points().to_vec(), snap.t);
            write(
                &snap_dir.join(format!("frame_{:05}_tree_{i}.txt", snap.frame)),
                cloud.to_text(),
            )?;
        }
    }
    let mut timings = String::from("stage,index,seconds\n");
    for (stage, samples) in [
        ("map_update", &log.timings.map_update),
        ("tree_build", &log.timings.tree_build),
        ("plan", &log.timings.plan),
        ("scan", &log.timings.scan),
    ] {
        for (i, s) in samples.iter().enumerate() {
            let _ = writeln!(timings, "{stage},{i},{s:.9}");
        }
    }
    write(&out_dir.join("timings.csv"), timings)?;
    write(&out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok((report, log))
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub scenario: String,
    pub repetitions: usize,
    pub map_update: StageStats,
    pub tree_build: StageStats,
    pub plan: StageStats,
    pub outcomes: Vec<Outcome>,
}

impl BenchTable {
    /// Delimited table, one row per stage.
    pub fn to_table(&self) -> String {
        let mut out = String::from("stage,count,min_ms,mean_ms,p95_ms,max_ms\n");
        for (name, s) in [
            ("map_update", &self.map_update),
            ("tree_build", &self.tree_build),
            ("plan", &self.plan),
        ] {
            let _ = writeln!(
                out,
                "{name},{},{:.4},{:.4},{:.4},{:.4}",
                s.count, s.min_ms, s.mean_ms, s.p95_ms, s.max_ms
            );
        }
        out
    }
}

/// Runs the scenario `repetitions` times in sequence and pools the
/// per-stage samples.
pub fn bench(scenario: &Scenario, repetitions: usize) -> Result<BenchTable> {
    if repetitions == 0 {
        return Err(CliError::Usage("--bench needs at least one repetition".into()));
    }
    let (mut map_update, mut tree_build, mut plan, mut outcomes) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..repetitions {
        let log = simulate(scenario)?;
        map_update.extend(log.timings.map_update);
        tree_build.extend(log.timings.tree_build);
        plan.extend(log.timings.plan);
        outcomes.push(log.outcome);
    }
    Ok(BenchTable {
        scenario: scenario.name.clone(),
        repetitions,
        map_update: StageStats::from_seconds(&map_update),
        tree_build: StageStats::from_seconds(&tree_build),
        plan: StageStats::from_seconds(&plan),
        outcomes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    /// One entry per swept resolution, backdrop present.
    pub sweep: Vec<ThinObjectReport>,
    /// First resolution again with the backdrop removed.
    pub without_backdrop: ThinObjectReport,
}

impl CompareReport {
    pub fn to_table(&self) -> String {
        let mut out = String::from(
            "case,resolution,bar_cells,occupied_bar_cells,occupied_fraction,pointcloud_bar_points,grid_cells_traversed\n",
        );
        let rows = self
            .sweep
            .iter()
            .map(|r| ("backdrop", r))
            .chain(std::iter::once(("no_backdrop", &self.without_backdrop)));
        for (case, r) in rows {
            let _ = writeln!(
                out,
                "{case},{},{},{},{:.4},{},{}",
                r.grid_resolution,
                r.bar_cells,
                r.occupied_bar_cells,
                r.bar_cell_occupied_fraction,
                r.pointcloud_bar_points,
                r.grid_cells_traversed
            );
        }
        out
    }
}

fn thin_setup(scenario: &Scenario, env: Environment, resolution: f64) -> Result<ThinObjectSetup> {
    let c = scenario
        .compare
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("scenario '{}' has no [compare] section", scenario.name)))?;
    let bar = env
        .index_of(&c.bar)
        .ok_or_else(|| CliError::Usage(format!("bar '{}' not found", c.bar)))?;
    Ok(ThinObjectSetup {
        bar,
        sensor: scenario.sensor,
        sensor_pose: level_pose(&scenario.start_position(), scenario.start.yaw_deg.to_radians()),
        frames: c.frames,
        seed: scenario.seed,
        grid_resolution: resolution,
        grid_params: c.grid,
        map: scenario.map,
        env,
    })
}

/// Occupancy grid versus point-cloud map on the scenario's thin bar.
pub fn compare_maps(scenario: &Scenario) -> Result<CompareReport> {
    scenario.validate()?;
    let c = scenario
        .compare
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("scenario '{}' has no [compare] section", scenario.name)))?;
    let mut sweep = Vec::new();
    for &res in &c.resolutions {
        sweep.push(thin_object_experiment(&thin_setup(scenario, scenario.environment(), res)?)?);
    }
    let bare = Environment::new(
        scenario
            .obstacles
            .iter()
            .filter(|o| !c.backdrop.contains(&o.name))
            .cloned()
            .collect(),
    );
    let without_backdrop = thin_object_experiment(&thin_setup(scenario, bare, c.resolutions[0])?)?;
    Ok(CompareReport {
        scenario: scenario.name.clone(),
        sweep,
        without_backdrop,
    })
}

/// Writes `compare.json`, `compare.csv` and one grid slice per resolution
/// through the sensor height.
pub fn write_compare(report: &CompareReport, scenario: &Scenario, out_dir: &Path) -> Result<()> {
    mkdir(out_dir)?;
    write(&out_dir.join("compare.json"), serde_json::to_string_pretty(report)?)?;
    write(&out_dir.join("compare.csv"), report.to_table())?;
    let z = scenario.start.position[2];
    for r in report.sweep.iter() {
        write(
            &out_dir.join(format!("grid_slice_{:.2}.txt", r.grid_resolution)),
            r.grid.export_slice(z),
        )?;
    }
    write(
        &out_dir.join(format!(
            "grid_slice_{:.2}_no_backdrop.txt",
            report.without_backdrop.grid_resolution
        )),
        report.without_backdrop.grid.export_slice(z),
    )?;
    Ok(())
}
