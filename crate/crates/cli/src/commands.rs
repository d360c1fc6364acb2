//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use covert_nav::maps::{build_cover_map, build_goal_map, build_height_map, format_value, parse_grids};
use covert_nav::perception::segment_cover;
use covert_nav::rl::{build_dataset, cql_train, Dataset, QFunction, RlError, NUM_ACTIONS, NUM_STATES};
use covert_nav::sim::{build_suite_scenes, child_seed, comparison, run_suite, suite_csv, Policy, Trace};
use covert_nav::threat::{ThreatFieldEngine, ThreatTracker, Trajectory};
use covert_nav::worldgen::{generate_world, sample_labeled_point_cloud, PointCloud, Scenario, World};
use covert_nav::GridSpec;
use log::info;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "covert-nav", version, about = "Covert navigation simulation pipeline")]
pub struct Cli {
    /// JSON run configuration layered over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a world and its sampled point cloud.
    World(WorldArgs),
    /// Build cover, height, goal and optionally threat maps for a world.
    Maps(MapsArgs),
    /// Synthesize an offline dataset from scripted behavior.
    Dataset(DatasetArgs),
    /// Train a Q-function on a dataset.
    Train(TrainArgs),
    /// Evaluate the learned policy against the baselines.
    Eval(EvalArgs),
    /// Export plot-ready CSV from traces or map files.
    #[command(name = "export-viz", subcommand)]
    ExportViz(VizCommand),
}

#[derive(Debug, Args)]
pub struct WorldArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub extent_x: Option<f64>,
    #[arg(long)]
    pub extent_y: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MapsArgs {
    #[arg(long)]
    pub world: PathBuf,
    /// Point cloud in xyz format; sampled from the world when omitted.
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// Goal position as `x,y` in meters.
    #[arg(long, value_parser = parse_point)]
    pub goal: (f64, f64),
    /// JSON array of reported threat positions, `[[x, y], ...]`.
    #[arg(long)]
    pub threats: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV loss log with columns `epoch,td_loss,cql_term`.
    #[arg(long)]
    pub loss: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PolicyName {
    Cql,
    CqlNoThreat,
    ShortestPath,
    GreedyCover,
    Planner,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Option<Vec<Scenario>>,
    #[arg(long, value_delimiter = ',', default_value = "cql,cql_no_threat,shortest_path,greedy_cover,planner")]
    pub policies: Vec<PolicyName>,
}

#[derive(Debug, Subcommand)]
pub enum VizCommand {
    /// One row per step of a trace: the pose after the step and what was sensed there.
    Trajectory {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One row per cell of a grid block.
    Heatmap {
        #[arg(long)]
        grid: PathBuf,
        /// Block to export when the file holds several.
        #[arg(long)]
        role: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("{x:?}: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("{y:?}: {e}"))?;
    Ok((x, y))
}

pub const TRAJECTORY_HEADER: &str = "step,x,y,theta,action,v,omega,reward,detected,collision,cover,threat";
pub const HEATMAP_HEADER: &str = "i,j,x,y,value";
pub const LOSS_HEADER: &str = "epoch,td_loss,cql_term";

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn rl_error(path: &Path, e: RlError) -> CliError {
    match e {
        RlError::Format(reason) => CliError::input(path, reason),
        RlError::EmptyDataset => CliError::input(path, "dataset holds no transitions"),
        other => CliError::Failed(other.to_string()),
    }
}

/// Runs a parsed command line with the process environment.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref(), std::env::vars())?;
    execute(cli.command, config)
}

/// Runs `command` against an already loaded config.
pub fn execute(command: Command, mut config: RunConfig) -> Result<(), CliError> {
    match command {
        Command::World(a) => {
            config.seed = a.seed.unwrap_or(config.seed);
            config.world.scenario = a.scenario.unwrap_or(config.world.scenario);
            config.world.extent_x = a.extent_x.unwrap_or(config.world.extent_x);
            config.world.extent_y = a.extent_y.unwrap_or(config.world.extent_y);
            config.validate()?;
            cmd_world(&config, &a.out)
        }
        Command::Maps(a) => {
            config.seed = a.seed.unwrap_or(config.seed);
            config.validate()?;
            cmd_maps(&config, &a)
        }
        Command::Dataset(a) => {
            config.seed = a.seed;
            config.dataset.params.episodes = a.episodes.unwrap_or(config.dataset.params.episodes);
            config.validate()?;
            cmd_dataset(&config, &a.out)
        }
        Command::Train(a) => {
            config.seed = a.seed;
            config.cql.epochs = a.epochs.unwrap_or(config.cql.epochs);
            config.cql.alpha = a.alpha.unwrap_or(config.cql.alpha);
            config.validate()?;
            cmd_train(&config, &a.dataset, &a.out, a.loss.as_deref())
        }
        Command::Eval(a) => {
            config.seed = a.seed;
            config.eval.parallelism = a.parallelism.unwrap_or(config.eval.parallelism);
            config.eval.trials = a.trials.unwrap_or(config.eval.trials);
            if let Some(s) = &a.scenarios {
                config.eval.scenarios = s.clone();
            }
            config.validate()?;
            cmd_eval(&config, &a.q, &a.out, &a.policies)
        }
        Command::ExportViz(VizCommand::Trajectory { trace, out }) => cmd_export_trajectory(&trace, &out),
        Command::ExportViz(VizCommand::Heatmap { grid, role, out }) => cmd_export_heatmap(&grid, role.as_deref(), &out),
    }
}

/// Writes `world.json` and `cloud.xyz` into `out`.
pub fn cmd_world(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let w = &config.world;
    let world = generate_world(w.scenario, w.extent_x, w.extent_y, config.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (cloud, _) = sample_labeled_point_cloud(&world, &config.scene.cloud, config.seed)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let json = world.to_json().map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(&out.join("world.json"), json)?;
    write_file(&out.join("cloud.xyz"), cloud.to_xyz())?;
    info!("world {:?} with {} objects, {} points", w.scenario, world.objects.len(), cloud.len());
    Ok(())
}

fn load_world(path: &Path) -> Result<World, CliError> {
    World::from_json(&read_text(path)?).map_err(|e| CliError::input(path, e))
}

fn load_threats(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let points: Vec<(f64, f64)> = serde_json::from_str(&read_text(path)?).map_err(|e| CliError::input(path, e))?;
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(CliError::input(path, "threat positions must be finite"));
    }
    Ok(points)
}

/// Writes `cover.grid`, `height.grid`, `goal.grid` and, given threat reports,
/// `threat.grid` into the output directory.
pub fn cmd_maps(config: &RunConfig, args: &MapsArgs) -> Result<(), CliError> {
    let world = load_world(&args.world)?;
    let cloud = match &args.cloud {
        Some(path) => PointCloud::from_xyz(&read_text(path)?).map_err(|e| CliError::input(path, e))?,
        None => {
            sample_labeled_point_cloud(&world, &config.scene.cloud, config.seed)
                .map_err(|e| CliError::Failed(e.to_string()))?
                .0
        }
    };
    let scene = &config.scene;
    let spec = GridSpec::covering(world.extent_x, world.extent_y, scene.cell_size)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let segmentation = segment_cover(&cloud, &scene.cluster, &scene.cover_thresholds)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let cover = build_cover_map(&cloud, &segmentation.cover_indices, &spec).map_err(|e| CliError::Failed(e.to_string()))?;
    let height = build_height_map(&cloud, &spec, world.ground_z);
    let goal_cell = spec
        .project(args.goal.0, args.goal.1)
        .ok_or_else(|| CliError::Config(format!("goal {:?} lies outside the world", args.goal)))?;
    let goal = build_goal_map(&spec, args.goal).map_err(|e| CliError::Failed(e.to_string()))?;

    write_file(&args.out.join("cover.grid"), cover.to_text())?;
    write_file(&args.out.join("height.grid"), height.to_text())?;
    write_file(&args.out.join("goal.grid"), goal.to_text())?;

    if let Some(path) = &args.threats {
        let reports = load_threats(path)?
            .into_iter()
            .map(|(x, y)| {
                spec.project(x, y)
                    .map(|c| vec![c])
                    .ok_or_else(|| CliError::input(path, format!("threat ({x}, {y}) lies outside the world")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sim = &config.sim;
        let tracker = ThreatTracker::from_intel(spec, &reports, sim.prior_weight, sim.prior_sigma_cells)
            .map_err(|e| CliError::Failed(e.to_string()))?;
        let vantages = tracker
            .vantages(sim.threat.vantage_capacity, sim.threat.mass_floor)
            .map_err(|e| CliError::Failed(e.to_string()))?;
        let mut engine = ThreatFieldEngine::new(height.clone(), sim.threat);
        let threat = engine
            .field_from_vantages(&vantages, &Trajectory::single(goal_cell), &cover, &goal)
            .map_err(|e| CliError::Failed(e.to_string()))?;
        write_file(&args.out.join("threat.grid"), threat.to_text())?;
    }
    Ok(())
}

/// Worlds the dataset is drawn from, `worlds_per_scenario` per listed scenario.
pub fn dataset_worlds(config: &RunConfig) -> Result<Vec<World>, CliError> {
    let d = &config.dataset;
    let mut worlds = Vec::new();
    for (si, &scenario) in d.scenarios.iter().enumerate() {
        for r in 0..d.worlds_per_scenario {
            let seed = child_seed(config.seed, &[0xda7a, si as u64, r as u64]);
            worlds.push(generate_world(scenario, d.extent, d.extent, seed).map_err(|e| CliError::Config(e.to_string()))?);
        }
    }
    Ok(worlds)
}

pub fn cmd_dataset(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let worlds = dataset_worlds(config)?;
    let dataset = build_dataset(&worlds, &config.dataset.params, &config.scene, &config.sim, config.seed)?;
    info!(
        "{} transitions from {} episodes ({} skipped)",
        dataset.len(),
        dataset.header.episodes.len(),
        dataset.header.skipped
    );
    write_file(out, dataset.to_bytes())
}

pub fn cmd_train(config: &RunConfig, dataset: &Path, out: &Path, loss: Option<&Path>) -> Result<(), CliError> {
    let bytes = std::fs::read(dataset).map_err(|e| CliError::io(dataset, e))?;
    let data = Dataset::from_bytes(&bytes).map_err(|e| rl_error(dataset, e))?;
    let (table, log) =
        cql_train(NUM_STATES, NUM_ACTIONS, &data.tabular(), &config.cql, config.seed).map_err(|e| rl_error(dataset, e))?;
    let q = QFunction::from_table(table, config.cql.init).map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(out, q.to_json(Some(&config.cql)))?;
    if let Some(path) = loss {
        let mut csv = format!("{LOSS_HEADER}\n");
        for row in &log {
            csv.push_str(&format!("{},{},{}\n", row.epoch, row.td_loss, row.cql_term));
        }
        write_file(path, csv)?;
    }
    if let Some(last) = log.last() {
        info!("epoch {}: td {:.6} cql {:.6}", last.epoch, last.td_loss, last.cql_term);
    }
    Ok(())
}

/// Writes `traces/<policy>_<scenario>_<trial>.jsonl`, `results.csv` and
/// `comparison.json` into `out`.
pub fn cmd_eval(config: &RunConfig, q_path: &Path, out: &Path, policies: &[PolicyName]) -> Result<(), CliError> {
    let q = QFunction::from_json(&read_text(q_path)?).map_err(|e| rl_error(q_path, e))?;
    let e = &config.eval;
    let scenes = build_suite_scenes(&e.scenarios, e.trials, e.extent, &config.scene, config.seed, e.max_attempts)?;
    let policies: Vec<Policy<'_>> = policies
        .iter()
        .map(|p| match p {
            PolicyName::Cql => Policy::Cql { q: &q, threat_field: true },
            PolicyName::CqlNoThreat => Policy::Cql { q: &q, threat_field: false },
            PolicyName::ShortestPath => Policy::ShortestPath,
            PolicyName::GreedyCover => Policy::GreedyCover,
            PolicyName::Planner => Policy::Planner,
        })
        .collect();
    let records = run_suite(&scenes, &policies, &config.sim, config.seed, e.parallelism)?;
    for r in &records {
        let name = format!("{}_{}_{}.jsonl", r.policy, r.scenario.name(), r.trial);
        write_file(&out.join("traces").join(name), r.trace.to_jsonl())?;
    }
    write_file(&out.join("results.csv"), suite_csv(&records))?;
    let cmp = serde_json::to_string_pretty(&comparison(&records)).expect("serializable") + "\n";
    write_file(&out.join("comparison.json"), cmp)?;
    info!("{} episodes over {} scenes", records.len(), scenes.len());
    Ok(())
}

pub fn trajectory_csv(trace: &Trace) -> String {
    let mut out = format!("{TRAJECTORY_HEADER}\n");
    for s in &trace.steps {
        let [x, y, theta] = s.pose_after;
        out.push_str(&format!(
            "{},{x},{y},{theta},{},{},{},{},{},{},{},{}\n",
            s.step, s.action, s.v, s.omega, s.reward, s.detected as u8, s.collision as u8, s.cover, s.threat
        ));
    }
    out
}

pub fn cmd_export_trajectory(trace: &Path, out: &Path) -> Result<(), CliError> {
    let trace = Trace::from_jsonl(&read_text(trace)?).map_err(|e| CliError::input(trace, e))?;
    write_file(out, trajectory_csv(&trace))
}

pub fn cmd_export_heatmap(grid: &Path, role: Option<&str>, out: &Path) -> Result<(), CliError> {
    let blocks = parse_grids(&read_text(grid)?).map_err(|e| CliError::input(grid, e))?;
    let block = match role {
        Some(r) => blocks
            .iter()
            .find(|b| b.role == r)
            .ok_or_else(|| CliError::input(grid, format!("no block with role {r:?}")))?,
        None => blocks.first().ok_or_else(|| CliError::input(grid, "no grid blocks"))?,
    };
    let spec = block.grid.spec();
    let mut csv = format!("{HEATMAP_HEADER}\n");
    for c in spec.cells() {
        let (x, y) = spec.cell_center(c);
        csv.push_str(&format!("{},{},{x},{y},{}\n", c.i, c.j, format_value(block.grid.get(c))));
    }
    write_file(out, csv)
}
