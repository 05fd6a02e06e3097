use prmrl::connect::EdgeEvalParams;
use prmrl::dynamics::{AerialParams, IndoorParams};
use prmrl::policy::{Policy, Termination};
use prmrl::roadmap::{self, query, Planner, QueryOptions};
use prmrl::runner::{execute, export_trajectory, read_trajectory_csv};
use prmrl::seed;
use prmrl::sim::{AerialSim, IndoorSim, Simulator};
use prmrl::workspace::{maze, OccupancyGrid, DEFAULT_INFLATION_RADIUS};

fn maze_sim(seed: u64) -> IndoorSim {
    let spec = maze::MazeSpec::new(seed, 10.0, 10.0, 2.5);
    let grid = OccupancyGrid::load(&maze::generate(&spec).unwrap(), spec.resolution, DEFAULT_INFLATION_RADIUS).unwrap();
    IndoorSim::new(grid, IndoorParams::default()).unwrap()
}

#[test]
fn indoor_executions_are_consistent_with_their_csv() {
    let sim = maze_sim(12);
    let pi = Policy::reference_indoor(sim.params());
    let params = EdgeEvalParams::for_simulator(&sim).with_radius(&sim, 4.0);
    let planner = Planner::Rollout(&pi);
    let rm = roadmap::build(&sim, 0.4, &planner, &params, 4, "m").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seed::rng(9);
    let (mut runs, mut successes) = (0, 0);
    for q in 0..30 {
        let (a, b) = (sim.sample_free(&mut rng).unwrap(), sim.sample_free(&mut rng).unwrap());
        let Some(plan) = query(&rm, &sim, &planner, &a, &b, &QueryOptions::default(), q).unwrap() else {
            continue;
        };
        let rec = execute(&sim, &pi, &plan, params.epsilon, params.max_steps, q).unwrap();
        runs += 1;
        assert_eq!(rec.n_w, plan.n_w());
        assert!((rec.duration - rec.step_count() as f64 * sim.dt()).abs() < 1e-9);
        if rec.success {
            successes += 1;
            assert_eq!(rec.termination, Termination::Reached);
            assert!(rec.final_position().distance(&b) <= params.epsilon);
            assert!(rec.waypoints.iter().all(|w| w.reached));
        } else {
            assert_ne!(rec.termination, Termination::Reached);
        }
        let path = dir.path().join(format!("{q}.csv"));
        export_trajectory(&rec, &path).unwrap();
        let totals = read_trajectory_csv(&path).unwrap();
        assert_eq!(totals.columns, 7);
        assert!((totals.length - rec.length).abs() < 1e-6 * rec.length.max(1.0));
        assert!((totals.duration - rec.duration).abs() < 1e-9);
    }
    assert!(runs >= 10, "only {runs} plans");
    assert!(successes * 10 >= runs * 7, "{successes}/{runs}");
}

#[test]
fn aerial_executions_respect_the_load_bound() {
    let (w, h) = (80, 80);
    let mut mask = vec![false; w * h];
    for y in 30..50 {
        for x in 35..45 {
            mask[y * w + x] = true;
        }
    }
    let grid = OccupancyGrid::from_obstacles(w, h, 0.1, (0.0, 0.0), DEFAULT_INFLATION_RADIUS, &mask).unwrap();
    let ap = AerialParams {
        displacement_bound: 20f64.to_radians(),
        ..AerialParams::default()
    };
    let sim = AerialSim::new(grid, ap).unwrap();
    let pi = Policy::reference_aerial(sim.params());
    let params = EdgeEvalParams::for_simulator(&sim).with_radius(&sim, 4.0);
    let planner = Planner::Rollout(&pi);
    let rm = roadmap::build(&sim, 0.15, &planner, &params, 1, "m").unwrap();
    let mut rng = seed::rng(5);
    let mut runs = 0;
    for q in 0..10 {
        let (a, b) = (sim.sample_free(&mut rng).unwrap(), sim.sample_free(&mut rng).unwrap());
        let Some(plan) = query(&rm, &sim, &planner, &a, &b, &QueryOptions::default(), q).unwrap() else {
            continue;
        };
        let rec = execute(&sim, &pi, &plan, params.epsilon, params.max_steps, q).unwrap();
        runs += 1;
        let worst = rec.max_displacement().unwrap();
        if rec.termination != Termination::Constraint {
            assert!(worst < ap.displacement_bound, "{worst}");
        }
        assert!(rec.steps.iter().all(|s| s.displacement.is_some()));
    }
    assert!(runs > 0);
}
