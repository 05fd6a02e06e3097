use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use prmrl::config::ScenarioConfig;
use prmrl::connect::EdgeEvalParams;
use prmrl::policy::{episode_horizon, load_policy, save_policy, train_policy_search, Policy, RewardConfig, TrainConfig};
use prmrl::roadmap::{self, load_roadmap, save_roadmap, EdgeWeight, Planner, PlannerKind, QueryOptions, QueryResult};
use prmrl::runner::{self, export_trajectory, format_report_csv, Experiment, MapCase};
use prmrl::sim::{AerialSim, IndoorSim, Simulator, Task};
use prmrl::workspace::{load_map, maze, save_map, ConfigPoint, MapMeta, OccupancyGrid, DEFAULT_INFLATION_RADIUS};
use prmrl::Error;

/// Exit codes by failure category.
mod exit {
    pub const INPUT: u8 = 3;
    pub const INVALID: u8 = 4;
    pub const NO_PATH: u8 = 5;
    pub const EXECUTION: u8 = 6;
}

#[derive(Debug)]
struct Failure {
    code: u8,
    category: &'static str,
    message: String,
}

fn categorize(err: anyhow::Error) -> Failure {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return Failure {
            code: f.code,
            category: f.category,
            message: f.message.clone(),
        };
    }
    let code = match err.downcast_ref::<Error>() {
        Some(Error::Io(_) | Error::Parse { .. } | Error::Image { .. } | Error::VersionMismatch { .. } | Error::EmptyRaster) => {
            exit::INPUT
        }
        _ => exit::INVALID,
    };
    Failure {
        code,
        category: if code == exit::INPUT { "input" } else { "invalid" },
        message: format!("{err:#}"),
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

#[derive(Parser)]
#[command(name = "prmrl", version, about = "Probabilistic roadmaps with policy-validated edges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a navigation policy by derivative-free search.
    Train(TrainArgs),
    /// Build a roadmap.
    Build(BuildArgs),
    /// Plan a path between two configurations.
    Query(QueryArgs),
    /// Plan and execute a path, exporting the trajectory.
    Execute(ExecuteArgs),
    /// Build roadmaps for several densities and planners and run random queries.
    Bench(BenchArgs),
    /// Write a procedurally generated maze map.
    Maze(MazeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Indoor,
    Aerial,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Indoor => Task::Indoor,
            TaskArg::Aerial => Task::Aerial,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Sl,
    Rl,
}

impl From<PlannerArg> for PlannerKind {
    fn from(p: PlannerArg) -> Self {
        match p {
            PlannerArg::Sl => PlannerKind::StraightLine,
            PlannerArg::Rl => PlannerKind::Rollout,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Length,
    NegLogSuccess,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
}

#[derive(Args)]
struct MapArgs {
    /// Map raster (PGM/PNG with `.meta` sidecar) or `maze:SEED:WIDTH:HEIGHT:CORRIDOR`.
    #[arg(long)]
    map: String,
    #[arg(long, value_enum, default_value = "indoor")]
    task: TaskArg,
    /// Scenario key=value file overriding simulator defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the map's inflation radius, metres.
    #[arg(long)]
    inflation: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 24)]
    population: usize,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long, default_value_t = 64)]
    episodes: usize,
    /// Episode step cap; defaults to 8 m at top speed plus margin.
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long, default_value_t = 8.0)]
    max_goal_distance: f64,
}

#[derive(Args)]
struct EdgeArgs {
    #[arg(long, default_value_t = 0.85)]
    p_success: f64,
    #[arg(long, default_value_t = 20)]
    attempts: u32,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Neighbour radius, metres.
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    /// Rollout step cap; defaults to 4 * radius / (speed * dt).
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    map: MapArgs,
    #[command(flatten)]
    edge: EdgeArgs,
    #[arg(long, default_value_t = 0.4)]
    density: f64,
    #[arg(long, value_enum, default_value = "rl")]
    planner: PlannerArg,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    roadmap: PathBuf,
    /// Required for roadmaps built with the rollout planner.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// `x,y` or `x,y,z`.
    #[arg(long)]
    start: String,
    #[arg(long)]
    goal: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "length")]
    weight: WeightArg,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    plan: PlanArgs,
}

#[derive(Args)]
struct ExecuteArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Trajectory CSV output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// One or more maps (raster paths or maze specs).
    #[arg(long = "map", required = true, num_args = 1..)]
    maps: Vec<String>,
    #[arg(long, value_enum, default_value = "indoor")]
    task: TaskArg,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    inflation: Option<f64>,
    #[command(flatten)]
    edge: EdgeArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.4")]
    densities: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sl,rl")]
    planners: Vec<PlannerArg>,
    /// Executes every plan; required.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Also write one CSV per executed query.
    #[arg(long)]
    trajectories: bool,
    #[arg(long, value_enum, default_value = "length")]
    weight: WeightArg,
}

#[derive(Args)]
struct MazeArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20.0)]
    width: f64,
    #[arg(long, default_value_t = 20.0)]
    height: f64,
    #[arg(long, default_value_t = 2.5)]
    corridor: f64,
    /// Output raster; a `.meta` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

struct World {
    name: String,
    grid: OccupancyGrid,
    scenario: ScenarioConfig,
}

fn parse_maze(spec: &str) -> anyhow::Result<maze::MazeSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 5 {
        bail!("maze spec must be maze:SEED:WIDTH:HEIGHT:CORRIDOR, got `{spec}`");
    }
    let seed = parts[1].parse().context("maze seed")?;
    let nums: Vec<f64> = parts[2..]
        .iter()
        .map(|p| p.parse::<f64>().with_context(|| format!("maze dimension `{p}`")))
        .collect::<anyhow::Result<_>>()?;
    Ok(maze::MazeSpec::new(seed, nums[0], nums[1], nums[2]))
}

fn load_world(map: &str, config: Option<&Path>, inflation: Option<f64>) -> anyhow::Result<World> {
    let scenario = match config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let (name, grid) = if map.starts_with("maze:") {
        let spec = parse_maze(map)?;
        let raster = maze::generate(&spec)?;
        let grid = OccupancyGrid::load(&raster, spec.resolution, inflation.unwrap_or(DEFAULT_INFLATION_RADIUS))?;
        (map.replace(':', "-"), grid)
    } else {
        let path = Path::new(map);
        let (grid, _) = load_map(path, inflation)?;
        let name = path.file_stem().map_or("map".into(), |s| s.to_string_lossy().into_owned());
        (name, grid)
    };
    Ok(World { name, grid, scenario })
}

fn parse_point(s: &str, task: Task) -> anyhow::Result<ConfigPoint> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad coordinate `{c}`")))
        .collect::<anyhow::Result<_>>()?;
    match (task, v.as_slice()) {
        (Task::Indoor, [x, y]) => Ok(ConfigPoint::planar(*x, *y)),
        (Task::Aerial, [x, y, z]) => Ok(ConfigPoint::spatial(*x, *y, *z)),
        (Task::Indoor, _) => bail!("indoor points are `x,y`"),
        (Task::Aerial, _) => bail!("aerial points are `x,y,z`"),
    }
}

fn edge_params<S: Simulator>(sim: &S, a: &EdgeArgs) -> EdgeEvalParams {
    let mut p = EdgeEvalParams::for_simulator(sim).with_radius(sim, a.radius);
    p.p_success = a.p_success;
    p.num_attempts = a.attempts;
    p.epsilon = a.epsilon;
    if let Some(m) = a.max_steps {
        p.max_steps = m;
    }
    p
}

fn require_policy(path: Option<&Path>, task: Task, what: &str) -> anyhow::Result<Policy> {
    let path = path.ok_or_else(|| Error::MissingPolicy { planner: what.into() })?;
    let policy = load_policy(path)?;
    if policy.task() != task {
        bail!(Error::DimensionMismatch(format!("policy is for {}, map task is {task}", policy.task())));
    }
    Ok(policy)
}

/// Runs `f` with the simulator matching `task`.
macro_rules! with_sim {
    ($world:expr, $task:expr, |$sim:ident| $body:expr) => {
        match $task {
            Task::Indoor => {
                let $sim = IndoorSim::new($world.grid.clone(), $world.scenario.indoor)?;
                $body
            }
            Task::Aerial => {
                let $sim = AerialSim::new($world.grid.clone(), $world.scenario.aerial)?;
                $body
            }
        }
    };
}

fn train<S: Simulator>(sim: &S, initial: &Policy, args: &TrainArgs) -> anyhow::Result<()> {
    let cfg = TrainConfig {
        population: args.population,
        iterations: args.iterations,
        episodes: args.episodes,
        max_steps: args.max_steps.unwrap_or_else(|| episode_horizon(sim, args.max_goal_distance)),
        max_goal_distance: args.max_goal_distance,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let out = train_policy_search(sim, initial, &cfg, &RewardConfig::default(), |it, f| {
        eprintln!("iteration {it}: best success {:.3}, return {:.4}", f.success_rate, f.mean_return);
    })?;
    save_policy(&out.policy, &args.out)?;
    println!(
        "trained {} policy: success {:.3}, return {:.4} -> {}",
        sim.task(),
        out.best.fitness.success_rate,
        out.best.fitness.mean_return,
        args.out.display()
    );
    Ok(())
}

fn build<S: Simulator>(sim: &S, world: &World, args: &BuildArgs) -> anyhow::Result<()> {
    let params = edge_params(sim, &args.edge);
    let policy;
    let planner = match PlannerKind::from(args.planner) {
        PlannerKind::StraightLine => Planner::StraightLine,
        PlannerKind::Rollout => {
            policy = require_policy(args.policy.as_deref(), sim.task(), "rl")?;
            Planner::Rollout(&policy)
        }
    };
    let rm = roadmap::build(sim, args.density, &planner, &params, args.seed, &world.grid.content_hash())?;
    save_roadmap(&rm, &args.out)?;
    println!(
        "{} roadmap: {} nodes, {} edges, {} collision checks -> {}",
        rm.meta.planner,
        rm.node_count(),
        rm.edge_count(),
        rm.meta.collision_checks,
        args.out.display()
    );
    Ok(())
}

fn plan<S: Simulator>(sim: &S, world: &World, args: &PlanArgs) -> anyhow::Result<(QueryResult, roadmap::Roadmap, Option<Policy>)> {
    let rm = load_roadmap(&args.roadmap)?;
    if rm.meta.task != sim.task() {
        bail!(Error::InvalidPlan(format!("roadmap is for {}, not {}", rm.meta.task, sim.task())));
    }
    if rm.meta.map_hash != world.grid.content_hash() {
        eprintln!("warning: roadmap was built on a different map");
    }
    let policy = match (rm.meta.planner, &args.policy) {
        (PlannerKind::Rollout, _) => Some(require_policy(args.policy.as_deref(), sim.task(), "rl")?),
        (PlannerKind::StraightLine, Some(p)) => Some(require_policy(Some(p), sim.task(), "sl")?),
        (PlannerKind::StraightLine, None) => None,
    };
    let planner = match (rm.meta.planner, &policy) {
        (PlannerKind::Rollout, Some(p)) => Planner::Rollout(p),
        _ => Planner::StraightLine,
    };
    let start = parse_point(&args.start, sim.task())?;
    let goal = parse_point(&args.goal, sim.task())?;
    let options = QueryOptions {
        weight: match args.weight {
            WeightArg::Length => EdgeWeight::Length,
            WeightArg::NegLogSuccess => EdgeWeight::NegLogSuccess,
        },
        ..QueryOptions::default()
    };
    let result = roadmap::query(&rm, sim, &planner, &start, &goal, &options, args.seed)?;
    let result = result.ok_or_else(|| Failure {
        code: exit::NO_PATH,
        category: "no-path",
        message: "start and goal are not connected by the roadmap".into(),
    })?;
    Ok((result, rm, policy))
}

fn print_plan(q: &QueryResult, lower: f64) {
    println!("waypoints {}", q.n_w());
    for (w, e) in q.waypoints.iter().zip(&q.edges) {
        println!(
            "  {:.3} {:.3} {:.3}  rate {:.3} length {:.3}",
            w.x, w.y, w.z, e.success_rate, e.mean_length
        );
    }
    println!("expected_success {:.6}", q.expected_success);
    println!("success_lower_bound {:.6}", lower);
    println!("expected_length {:.6}", q.expected_length);
    println!("expected_steps {:.3}", q.expected_steps);
}

fn query<S: Simulator>(sim: &S, world: &World, args: &QueryArgs) -> anyhow::Result<()> {
    let (q, rm, _) = plan(sim, world, &args.plan)?;
    print_plan(&q, roadmap::success_lower_bound(rm.meta.params.p_success, q.n_w() as f64));
    Ok(())
}

fn execute<S: Simulator>(sim: &S, world: &World, args: &ExecuteArgs) -> anyhow::Result<()> {
    let (q, rm, policy) = plan(sim, world, &args.plan)?;
    let policy = policy.ok_or_else(|| Error::MissingPolicy { planner: "execution".into() })?;
    let params = &rm.meta.params;
    let traj = runner::execute(sim, &policy, &q, params.epsilon, params.max_steps, args.plan.seed)?;
    export_trajectory(&traj, &args.out)?;
    println!(
        "success {} steps {} length {:.3} duration {:.2} -> {}",
        traj.success,
        traj.step_count(),
        traj.length,
        traj.duration,
        args.out.display()
    );
    if !traj.success {
        return Err(Failure {
            code: exit::EXECUTION,
            category: "execution",
            message: format!("execution failed: {:?}", traj.termination),
        }
        .into());
    }
    Ok(())
}

fn bench_task<S: Simulator>(sims: &[(String, String, S)], args: &BenchArgs) -> anyhow::Result<()> {
    let FormatArg::Csv = args.format;
    let task = sims[0].2.task();
    let policy = require_policy(args.policy.as_deref(), task, "bench")?;
    let planners: Vec<Planner> = args
        .planners
        .iter()
        .map(|p| match PlannerKind::from(*p) {
            PlannerKind::StraightLine => Planner::StraightLine,
            PlannerKind::Rollout => Planner::Rollout(&policy),
        })
        .collect();
    let exp = Experiment {
        maps: sims
            .iter()
            .map(|(name, hash, sim)| MapCase {
                name: name.clone(),
                map_hash: hash.clone(),
                sim,
            })
            .collect(),
        densities: args.densities.clone(),
        planners,
        executor: &policy,
        params: edge_params(&sims[0].2, &args.edge),
        query_options: QueryOptions {
            weight: match args.weight {
                WeightArg::Length => EdgeWeight::Length,
                WeightArg::NegLogSuccess => EdgeWeight::NegLogSuccess,
            },
            ..QueryOptions::default()
        },
        n_queries: args.queries,
        seed: args.seed,
    };
    let report = runner::run_experiment(&exp, Some(&args.out_dir), args.trajectories)?;
    print!("{}", format_report_csv(&report).0);
    Ok(())
}

fn bench(args: &BenchArgs) -> anyhow::Result<()> {
    let worlds = args
        .maps
        .iter()
        .map(|m| load_world(m, args.config.as_deref(), args.inflation))
        .collect::<anyhow::Result<Vec<_>>>()?;
    match Task::from(args.task) {
        Task::Indoor => {
            let sims = worlds
                .iter()
                .map(|w| Ok((w.name.clone(), w.grid.content_hash(), IndoorSim::new(w.grid.clone(), w.scenario.indoor)?)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            bench_task(&sims, args)
        }
        Task::Aerial => {
            let sims = worlds
                .iter()
                .map(|w| Ok((w.name.clone(), w.grid.content_hash(), AerialSim::new(w.grid.clone(), w.scenario.aerial)?)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            bench_task(&sims, args)
        }
    }
}

fn write_maze(args: &MazeArgs) -> anyhow::Result<()> {
    let spec = maze::MazeSpec::new(args.seed, args.width, args.height, args.corridor);
    let raster = maze::generate(&spec)?;
    let meta = MapMeta {
        resolution: spec.resolution,
        inflation_radius: DEFAULT_INFLATION_RADIUS,
        origin: (0.0, 0.0),
    };
    save_map(&args.out, &raster, &meta)?;
    println!("maze {}x{} m -> {}", args.width, args.height, args.out.display());
    Ok(())
}

fn configure_workers() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("PRMRL_WORKERS") {
        let n: usize = v.parse().map_err(|_| anyhow!("PRMRL_WORKERS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("PRMRL_WORKERS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_workers()?;
    match &cli.command {
        Command::Train(a) => {
            let world = load_world(&a.map.map, a.map.config.as_deref(), a.map.inflation)?;
            let task = Task::from(a.map.task);
            let initial = match task {
                Task::Indoor => Policy::reference_indoor(&world.scenario.indoor),
                Task::Aerial => Policy::reference_aerial(&world.scenario.aerial),
            };
            with_sim!(world, task, |sim| train(&sim, &initial, a))
        }
        Command::Build(a) => {
            let world = load_world(&a.map.map, a.map.config.as_deref(), a.map.inflation)?;
            with_sim!(world, Task::from(a.map.task), |sim| build(&sim, &world, a))
        }
        Command::Query(a) => {
            let m = &a.plan.map;
            let world = load_world(&m.map, m.config.as_deref(), m.inflation)?;
            with_sim!(world, Task::from(m.task), |sim| query(&sim, &world, a))
        }
        Command::Execute(a) => {
            let m = &a.plan.map;
            let world = load_world(&m.map, m.config.as_deref(), m.inflation)?;
            with_sim!(world, Task::from(m.task), |sim| execute(&sim, &world, a))
        }
        Command::Bench(a) => bench(a),
        Command::Maze(a) => write_maze(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let f = categorize(e);
            eprintln!("error[{}]: {}", f.category, f.message);
            ExitCode::from(f.code)
        }
    }
}
