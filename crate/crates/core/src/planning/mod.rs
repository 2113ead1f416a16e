//! Planning model: charger counts become decision variables shared by the
//! operation blocks of every demand scenario, and the objective is daily TCO.

mod grid;

use serde::{Deserialize, Serialize};

pub use grid::{grid_search, write_heatmap_csv, GridCell, GridSearchResult};

use crate::analytics::satisfied_rate;
use crate::domain::{validate_weights, CostBreakdown, DemandScenario, Schedule, StationConfig, TariffAndCosts, TimeGrid};
use crate::error::{Error, Result};
use crate::milp::{complete_assignment, solve_from, LinExpr, Model, SolveOptions, SolveStatus, Var};
use crate::operation::{
    build_scenario, dispatch, extract_schedule, primary_values, reprice, BlockInput, Counts, DispatchRule,
    OperationOptions, OperationProblem, ScenarioBlock,
};
use crate::parallel::{self, Execution};

/// How the per-scenario peaks enter the demand charge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakAggregation {
    /// Each scenario pays for its own peak, weighted by its probability.
    #[default]
    Weighted,
    /// One peak variable bounds the load of every scenario.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningProblem {
    /// Scenario weights are their `probability` fields.
    pub scenarios: Vec<DemandScenario>,
    pub grid: TimeGrid,
    /// Site parameters; the charger counts in it are ignored.
    pub station: StationConfig,
    pub tariff: TariffAndCosts,
    pub m_max: usize,
    pub n_max: usize,
    /// Operation settings shared by every scenario; `tolerance` selects the
    /// behavioural mode.
    pub options: OperationOptions,
    pub enforce_sr: bool,
    pub peak: PeakAggregation,
}

impl PlanningProblem {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("planning needs at least one scenario".into()));
        }
        validate_weights(&self.scenarios)?;
        let rho = self.tariff.sr_requirement;
        if self.enforce_sr && !(0.0..=1.0).contains(&rho) {
            return Err(Error::Config(format!("required satisfied rate must lie in [0, 1], got {rho}")));
        }
        Ok(())
    }

    /// Scenarios with every target clipped to what its stay allows.
    pub fn clipped_scenarios(&self) -> Vec<DemandScenario> {
        self.scenarios
            .iter()
            .map(|s| s.clipped(&self.grid, self.station.efficiency))
            .collect()
    }

    pub fn station_with(&self, m: usize, n: usize) -> StationConfig {
        self.station.with_counts(m, n)
    }

    pub fn capex_cents(&self, m: usize, n: usize) -> f64 {
        self.tariff.capex_cents_per_day(m, n)
    }
}

/// Outcome of one scenario at the chosen counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub label: String,
    pub probability: f64,
    pub costs: CostBreakdown,
    pub satisfied_rate: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub m: usize,
    pub n: usize,
    /// Daily TCO, ¢: weighted OPEX plus daily CAPEX.
    pub tco: f64,
    /// Probability-weighted daily OPEX, ¢.
    pub opex: f64,
    pub capex: f64,
    /// Probability-weighted satisfied rate, recomputed from the schedules.
    pub satisfied_rate: f64,
    pub scenarios: Vec<ScenarioOutcome>,
    pub status: SolveStatus,
    /// Solver objective, ¢.
    pub objective: f64,
    pub gap: f64,
    pub wall_time: f64,
}

/// Planning MILP with handles to its decision variables.
pub struct PlanningModel {
    pub model: Model,
    pub m: Var,
    /// `delta[k] = 1` iff `n = k`.
    pub delta: Vec<Var>,
    pub(crate) blocks: Vec<ScenarioBlock>,
    /// Satisfaction indicators per scenario, when the SR constraint is on.
    pub sat: Vec<Vec<Var>>,
    pub(crate) scenarios: Vec<DemandScenario>,
}

impl PlanningModel {
    pub fn n_expr(&self) -> LinExpr {
        let mut e = LinExpr::new();
        for (k, d) in self.delta.iter().enumerate() {
            e.add_term(*d, k as f64);
        }
        e
    }
}

pub fn build_planning_model(problem: &PlanningProblem) -> Result<PlanningModel> {
    problem.validate()?;
    let scenarios = problem.clipped_scenarios();
    let mut model = Model::new();
    let m = model.integer("m", 0.0, problem.m_max as f64);
    let delta: Vec<Var> = (0..=problem.n_max).map(|k| model.binary(format!("delta_{k}"))).collect();
    model.add_eq("one_n", LinExpr::sum(delta.iter().copied()), 1.0)?;
    let counts = Counts::Shared {
        m,
        m_max: problem.m_max,
        delta: delta.clone(),
    };
    let shared_peak = match problem.peak {
        PeakAggregation::Weighted => None,
        PeakAggregation::Max => Some(model.continuous("pdc", problem.options.demand_charge_floor, f64::INFINITY)),
    };
    // The station passed to the blocks only supplies base load and efficiency.
    let station = problem.station_with(problem.m_max, problem.n_max);

    let mut objective = LinExpr::new();
    let mut blocks = Vec::with_capacity(scenarios.len());
    for (s, scenario) in scenarios.iter().enumerate() {
        let input = BlockInput {
            scenario,
            grid: &problem.grid,
            station: &station,
            tariff: &problem.tariff,
            options: &problem.options,
        };
        let block = build_scenario(&mut model, &input, &counts, &format!("_s{s}"), shared_peak)?;
        if shared_peak.is_some() {
            let mut opex = block.costs.opex();
            opex.add_term(block.peak, -input.demand_charge_rate());
            objective = objective + opex * scenario.probability;
        } else {
            objective = objective + block.costs.opex() * scenario.probability;
        }
        blocks.push(block);
    }
    if let Some(peak) = shared_peak {
        let rate = problem.tariff.demand_charge_cents(problem.grid.horizon_hours());
        let rate = problem.options.demand_charge_rate.unwrap_or(rate);
        objective.add_term(peak, rate);
    }
    let per_fc = problem.capex_cents(1, 0);
    let per_rc = problem.capex_cents(0, 1);
    objective.add_term(m, per_fc);
    for (k, d) in delta.iter().enumerate() {
        objective.add_term(*d, per_rc * k as f64);
    }
    model.set_objective(objective)?;

    let mut planning = PlanningModel {
        model,
        m,
        delta,
        blocks,
        sat: Vec::new(),
        scenarios,
    };
    if problem.enforce_sr {
        planning.sat = add_sr_constraint(
            &mut planning,
            &problem.grid,
            problem.station.efficiency,
            problem.tariff.sr_threshold,
            problem.tariff.sr_requirement,
        )?;
    }
    Ok(planning)
}

/// Adds satisfaction indicators and `Σ_s π_s r_s ≥ rho`. Returns the
/// indicator of every session, per scenario; zero-demand sessions get a
/// variable fixed at one.
pub fn add_sr_constraint(
    planning: &mut PlanningModel,
    grid: &TimeGrid,
    eta: f64,
    threshold: f64,
    rho: f64,
) -> Result<Vec<Vec<Var>>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Config(format!("required satisfied rate must lie in [0, 1], got {rho}")));
    }
    let model = &mut planning.model;
    let mut all = Vec::with_capacity(planning.blocks.len());
    let mut rate = LinExpr::new();
    for (s, (scenario, block)) in planning.scenarios.iter().zip(&planning.blocks).enumerate() {
        let mut sat = Vec::with_capacity(scenario.len());
        if scenario.is_empty() {
            rate.constant += scenario.probability;
        }
        let weight = scenario.probability / scenario.len().max(1) as f64;
        for (i, (session, sv)) in scenario.sessions.iter().zip(&block.sessions).enumerate() {
            let x = if session.demand <= 0.0 {
                model.fixed_binary(format!("sat_s{s}_{i}"), true)
            } else {
                let x = model.binary(format!("sat_s{s}_{i}"));
                let d = session.demand;
                model.add_ge(
                    format!("sat_def_s{s}_{i}"),
                    sv.delivered(session, grid, eta) + x * (-d),
                    threshold * d - d,
                )?;
                x
            };
            rate.add_term(x, weight);
            sat.push(x);
        }
        all.push(sat);
    }
    model.add_ge("sr", rate, rho)?;
    Ok(all)
}

pub fn solve_planning(problem: &PlanningProblem, solver: &SolveOptions) -> Result<PlanResult> {
    let planning = build_planning_model(problem)?;
    log::debug!(
        "planning model: {} scenarios, {} vars ({} integral), {} rows",
        planning.scenarios.len(),
        planning.model.num_vars(),
        planning.model.num_integral(),
        planning.model.constraints().len()
    );
    let start = if problem.options.warm_start && !problem.options.discrete_power {
        warm_start(&planning, problem, solver)?
    } else {
        None
    };
    let result = solve_from(&planning.model, solver, start.as_deref())?;
    match result.status {
        SolveStatus::Infeasible => {
            return Err(Error::Solver(if problem.enforce_sr {
                format!(
                    "satisfied rate {} is unreachable with at most {} FCs and {} RCs",
                    problem.tariff.sr_requirement, problem.m_max, problem.n_max
                )
            } else {
                "planning model is infeasible".into()
            }))
        }
        SolveStatus::TimeLimit => {
            return Err(Error::Solver(format!("no feasible plan within {} s", solver.time_limit)))
        }
        SolveStatus::Feasible { gap } => log::warn!("planning solve stopped at gap {:.3}%", gap * 100.0),
        SolveStatus::Optimal => {}
    }
    let m = result.value(planning.m).round().max(0.0) as usize;
    let n = planning.n_expr().evaluate(&result.values).round().max(0.0) as usize;
    let station = problem.station_with(m, n);
    let mut outcomes = Vec::with_capacity(planning.scenarios.len());
    for (scenario, block) in planning.scenarios.iter().zip(&planning.blocks) {
        let op = OperationProblem {
            scenario,
            grid: &problem.grid,
            station: &station,
            tariff: &problem.tariff,
            options: &problem.options,
        };
        let schedule = extract_schedule(block, &result.values, &op);
        outcomes.push(outcome(&op, schedule)?);
    }
    Ok(summarize(problem, m, n, outcomes, &result))
}

fn outcome(op: &OperationProblem<'_>, schedule: Schedule) -> Result<ScenarioOutcome> {
    let costs = reprice(&schedule, op);
    let sr = if op.scenario.is_empty() {
        1.0
    } else {
        satisfied_rate(&schedule, op.scenario, op.tariff.sr_threshold)?
    };
    Ok(ScenarioOutcome {
        label: op.scenario.label.clone(),
        probability: op.scenario.probability,
        costs,
        satisfied_rate: sr,
        schedule,
    })
}

fn summarize(
    problem: &PlanningProblem,
    m: usize,
    n: usize,
    scenarios: Vec<ScenarioOutcome>,
    result: &crate::milp::SolveResult,
) -> PlanResult {
    let opex: f64 = scenarios.iter().map(|o| o.probability * o.costs.opex).sum();
    let sr: f64 = scenarios.iter().map(|o| o.probability * o.satisfied_rate).sum();
    let capex = problem.capex_cents(m, n);
    PlanResult {
        m,
        n,
        tco: opex + capex,
        opex,
        capex,
        satisfied_rate: sr,
        scenarios,
        status: result.status,
        objective: result.objective,
        gap: result.gap,
        wall_time: result.wall_time,
    }
}

/// Dispatch-based TCO and SR of every cell; the cheapest admissible cell is
/// completed into a point of the planning model.
fn warm_start(planning: &PlanningModel, problem: &PlanningProblem, solver: &SolveOptions) -> Result<Option<Vec<f64>>> {
    let cells: Vec<(usize, usize)> = (0..=problem.m_max)
        .flat_map(|m| (0..=problem.n_max).map(move |n| (m, n)))
        .collect();
    let evaluated = parallel::map(Execution::Parallel, &cells, |&(m, n)| {
        let station = problem.station_with(m, n);
        let mut tco = problem.capex_cents(m, n);
        let mut sr = 0.0;
        let mut schedules = Vec::with_capacity(planning.scenarios.len());
        for scenario in &planning.scenarios {
            let op = OperationProblem {
                scenario,
                grid: &problem.grid,
                station: &station,
                tariff: &problem.tariff,
                options: &problem.options,
            };
            let (cost, schedule) = [DispatchRule::FixFirst, DispatchRule::RoboFirst]
                .into_iter()
                .map(|rule| {
                    let s = dispatch(&op, rule);
                    (reprice(&s, &op).opex, s)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("two rules");
            tco += scenario.probability * cost;
            sr += scenario.probability
                * if scenario.is_empty() {
                    1.0
                } else {
                    satisfied_rate(&schedule, scenario, problem.tariff.sr_threshold).unwrap_or(0.0)
                };
            schedules.push(schedule);
        }
        (tco, sr, schedules)
    });
    let best = cells
        .iter()
        .zip(evaluated)
        .filter(|(_, (_, sr, _))| !problem.enforce_sr || *sr >= problem.tariff.sr_requirement)
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0));
    let Some((&(m, n), (_, _, schedules))) = best else {
        return Ok(None);
    };
    let station = problem.station_with(m, n);
    let mut fixed = vec![(planning.m, m as f64)];
    for (k, d) in planning.delta.iter().enumerate() {
        fixed.push((*d, if k == n { 1.0 } else { 0.0 }));
    }
    for ((scenario, block), schedule) in planning.scenarios.iter().zip(&planning.blocks).zip(&schedules) {
        let op = OperationProblem {
            scenario,
            grid: &problem.grid,
            station: &station,
            tariff: &problem.tariff,
            options: &problem.options,
        };
        fixed.extend(primary_values(block, schedule, &op));
    }
    let opts = SolveOptions {
        mip_gap: 1e-4,
        time_limit: solver.time_limit.min(10.0),
        verbose: false,
        ..*solver
    };
    Ok(complete_assignment(&planning.model, &fixed, &opts)?)
}
