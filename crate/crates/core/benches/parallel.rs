use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mccs_core::config::Config;
use mccs_core::domain::{DemandScenario, Session, StationConfig, TimeGrid};
use mccs_core::milp::SolveOptions;
use mccs_core::mpc::{run_replicas, run_rolling, CompleteInformation, HorizonBlock, StayRule};
use mccs_core::operation::{solve_operation, OperationOptions, OperationProblem};
use mccs_core::parallel::{self, Execution};
use mccs_core::planning::grid_search;
use mccs_core::stochastic::{sample_trace, seeded};
use rand::Rng;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn small_config() -> Config {
    let mut cfg = Config::default();
    cfg.demand.sessions = [6, 2];
    cfg.demand.synthetic.weekday_days = 4;
    cfg.demand.synthetic.weekend_days = 2;
    cfg.demand.synthetic.weekday_mean = 6.0;
    cfg.demand.synthetic.weekend_mean = 2.0;
    cfg.planning.m_max = 2;
    cfg.planning.n_max = 2;
    cfg.mpc.horizon = vec![HorizonBlock { count: 4, span: 1 }, HorizonBlock { count: 4, span: 4 }];
    cfg
}

fn grid_cells(c: &mut Criterion) {
    let cfg = small_config();
    let mut rng = seeded(1);
    let pool = cfg.session_pool(&mut rng).unwrap();
    let problem = cfg.planning_problem(cfg.scenarios(&pool, &mut rng).unwrap()).unwrap();
    let solver = SolveOptions::exact();
    let mut group = c.benchmark_group("grid_cells");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(grid_search(&problem, 0..=2, 0..=2, &solver, exec).unwrap()))
        });
    }
    group.finish();
}

fn tiny_scenario(seed: u64) -> (DemandScenario, StationConfig) {
    let mut rng = seeded(seed);
    let sessions = (0..3)
        .map(|id| {
            let a = rng.random_range(0..5);
            let d = rng.random_range(a + 1..=6);
            Session::new(id, a, d, rng.random_range(1.0..4.0), 6.6)
        })
        .collect();
    let grid = TimeGrid::uniform(6, 0.25).unwrap();
    (
        DemandScenario::new("tiny", 1.0, sessions).clipped(&grid, 1.0),
        StationConfig::new(1, 1, 6),
    )
}

fn oracle_instances(c: &mut Criterion) {
    let cfg = Config::default();
    let mut tariff = cfg.tariff().unwrap();
    tariff.tou.truncate(6);
    let grid = TimeGrid::uniform(6, 0.25).unwrap();
    let options = OperationOptions {
        discrete_power: true,
        ..OperationOptions::default()
    };
    let instances: Vec<_> = (0..32).map(tiny_scenario).collect();
    let mut group = c.benchmark_group("oracle_instances");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                parallel::map(exec, &instances, |(scenario, station)| {
                    let problem = OperationProblem {
                        scenario,
                        grid: &grid,
                        station,
                        tariff: &tariff,
                        options: &options,
                    };
                    solve_operation(&problem, &SolveOptions::exact()).unwrap().objective
                })
            })
        });
    }
    group.finish();
}

fn mc_replicas(c: &mut Criterion) {
    let cfg = small_config();
    let site = cfg.site_profile(1, 1).unwrap();
    let pool = cfg.session_pool(&mut seeded(2)).unwrap();
    let seeds: Vec<u64> = (0..4).collect();
    let steps = 48;
    let mut group = c.benchmark_group("mc_replicas");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                run_replicas(&seeds, exec, |seed| {
                    let mut rng = seeded(seed);
                    let trace = sample_trace(&pool, 1, site.steps_per_day, &cfg.behavior, &mut rng)?;
                    let predictor = CompleteInformation::new(&trace, site.max_power);
                    run_rolling(&trace, &predictor, &site, &cfg.mpc, &StayRule::Sigmoid(cfg.behavior), steps, &mut rng)
                })
            })
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(10));
    targets = grid_cells, oracle_instances, mc_replicas
}
criterion_main!(benches);
