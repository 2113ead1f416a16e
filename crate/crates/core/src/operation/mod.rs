//! Operation model: given charger counts and a demand scenario, choose
//! assignments, plug schedules and charging power minimising daily OPEX.

mod blocks;
mod dispatch;
mod export;
mod price;
mod validate;

use serde::{Deserialize, Serialize};

pub(crate) use blocks::{build_scenario, BlockInput, Counts, ScenarioBlock};
pub use dispatch::{dispatch, DispatchRule};
pub use export::{read_schedule_json, write_gantt_csv, write_schedule_json};
pub use price::reprice;
pub use validate::{validate_schedule, ValidationReport, Violation, ViolationKind};

use crate::domain::{
    Assignment, CostBreakdown, DemandScenario, QueueState, Schedule, Session, StationConfig, TariffAndCosts,
    TimeGrid, Tolerance,
};
use crate::error::{Error, Result};
use crate::milp::{complete_assignment, solve_from, Model, SolveOptions, SolveStatus, Var};

/// Shortfall (kWh) at or above which a PEV counts as not yet full.
pub const FULL_CHARGE_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationOptions {
    /// Replaces every session's own waiting tolerance.
    pub tolerance: Option<Tolerance>,
    /// Peak already reached in the current billing cycle, kW.
    pub demand_charge_floor: f64,
    /// Demand-charge coefficient in ¢/kW; derived from the tariff and the
    /// horizon length when absent.
    pub demand_charge_rate: Option<f64>,
    /// Restrict power to `{0, P̄}` (used for small exact comparisons).
    pub discrete_power: bool,
    pub full_charge_eps: f64,
    /// Seed the solver with the better of the greedy dispatch schedules.
    pub warm_start: bool,
}

impl Default for OperationOptions {
    fn default() -> Self {
        Self {
            tolerance: None,
            demand_charge_floor: 0.0,
            demand_charge_rate: None,
            discrete_power: false,
            full_charge_eps: FULL_CHARGE_EPS,
            warm_start: true,
        }
    }
}

/// Everything one operation solve needs. Charger counts come from `station`.
#[derive(Debug, Clone, Copy)]
pub struct OperationProblem<'a> {
    pub scenario: &'a DemandScenario,
    pub grid: &'a TimeGrid,
    pub station: &'a StationConfig,
    pub tariff: &'a TariffAndCosts,
    pub options: &'a OperationOptions,
}

impl<'a> OperationProblem<'a> {
    pub(crate) fn input(&self) -> BlockInput<'a> {
        BlockInput {
            scenario: self.scenario,
            grid: self.grid,
            station: self.station,
            tariff: self.tariff,
            options: self.options,
        }
    }

    pub fn demand_charge_rate(&self) -> f64 {
        self.input().demand_charge_rate()
    }

    /// Waiting tolerance in force for `session`.
    pub fn tolerance_of(&self, session: &crate::domain::Session) -> Tolerance {
        self.options.tolerance.unwrap_or(session.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationOutcome {
    pub schedule: Schedule,
    pub costs: CostBreakdown,
    pub status: SolveStatus,
    /// Solver objective, ¢.
    pub objective: f64,
    pub gap: f64,
    pub wall_time: f64,
}

/// Builds the operation MILP without solving it.
pub fn build_operation_model(problem: &OperationProblem<'_>) -> Result<Model> {
    let mut model = Model::new();
    let counts = Counts::Fixed {
        m: problem.station.fc_count,
        n: problem.station.rc_count,
    };
    let block = build_scenario(&mut model, &problem.input(), &counts, "", None)?;
    model.set_objective(block.costs.opex())?;
    Ok(model)
}

/// Solves the operation model and returns the extracted schedule with its
/// re-priced cost breakdown.
pub fn solve_operation(problem: &OperationProblem<'_>, solver: &SolveOptions) -> Result<OperationOutcome> {
    let mut model = Model::new();
    let counts = Counts::Fixed {
        m: problem.station.fc_count,
        n: problem.station.rc_count,
    };
    let block = build_scenario(&mut model, &problem.input(), &counts, "", None)?;
    model.set_objective(block.costs.opex())?;
    log::debug!(
        "operation model: {} sessions, {} vars ({} integral), {} rows",
        problem.scenario.len(),
        model.num_vars(),
        model.num_integral(),
        model.constraints().len()
    );
    let start = if problem.options.warm_start && !problem.options.discrete_power {
        warm_start(&model, &block, problem, solver)?
    } else {
        None
    };
    let result = solve_from(&model, solver, start.as_deref())?;
    match result.status {
        SolveStatus::Infeasible => {
            return Err(Error::Solver(format!(
                "operation model for `{}` is infeasible",
                problem.scenario.label
            )))
        }
        SolveStatus::TimeLimit => {
            return Err(Error::Solver(format!(
                "no feasible schedule for `{}` within {} s",
                problem.scenario.label, solver.time_limit
            )))
        }
        SolveStatus::Feasible { gap } => {
            log::warn!("operation solve stopped at gap {:.3}%", gap * 100.0)
        }
        SolveStatus::Optimal => {}
    }
    let schedule = extract_schedule(&block, &result.values, problem);
    let costs = reprice(&schedule, problem);
    Ok(OperationOutcome {
        schedule,
        costs,
        status: result.status,
        objective: result.objective,
        gap: result.gap,
        wall_time: result.wall_time,
    })
}

/// Completes the cheaper greedy dispatch schedule into a full MILP point.
fn warm_start(
    model: &Model,
    block: &ScenarioBlock,
    problem: &OperationProblem<'_>,
    solver: &SolveOptions,
) -> Result<Option<Vec<f64>>> {
    let best = [DispatchRule::FixFirst, DispatchRule::RoboFirst]
        .into_iter()
        .map(|rule| {
            let schedule = dispatch(problem, rule);
            let cost = reprice(&schedule, problem).opex;
            (cost, schedule)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| s)
        .expect("two rules");
    let fixed = primary_values(block, &best, problem);
    let opts = SolveOptions {
        mip_gap: 1e-4,
        time_limit: solver.time_limit.min(10.0),
        verbose: false,
        ..*solver
    };
    Ok(complete_assignment(model, &fixed, &opts)?)
}

/// Assignment, plug and power values of `schedule` for the block's variables.
pub(crate) fn primary_values(block: &ScenarioBlock, schedule: &Schedule, problem: &OperationProblem<'_>) -> Vec<(Var, f64)> {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut fixed = Vec::new();
    for (i, (s, sv)) in problem.scenario.sessions.iter().zip(&block.sessions).enumerate() {
        let a = schedule.assignments[i];
        fixed.push((sv.fix, flag(a == Assignment::Fix)));
        fixed.push((sv.robo, flag(a == Assignment::Robo)));
        fixed.push((sv.leave, flag(a == Assignment::Leave)));
        for (k, t) in (s.arrival..s.departure).enumerate() {
            fixed.push((sv.plug[k], flag(schedule.plug[i][t])));
            fixed.push((sv.power[k], schedule.power[i][t]));
        }
    }
    fixed
}

/// Reads a schedule out of a solution vector. Binaries are rounded, power is
/// clamped to its bounds and charge trajectories are recomputed from power.
pub(crate) fn extract_schedule(block: &ScenarioBlock, values: &[f64], problem: &OperationProblem<'_>) -> Schedule {
    let grid = problem.grid;
    let eta = problem.station.efficiency;
    let mut schedule = Schedule::all_leave(
        problem.scenario,
        grid,
        problem.station.fc_count,
        problem.station.rc_count,
    );
    let on = |v: crate::milp::Var| values[v.index()] > 0.5;
    for (i, (s, sv)) in problem.scenario.sessions.iter().zip(&block.sessions).enumerate() {
        schedule.assignments[i] = if on(sv.fix) {
            Assignment::Fix
        } else if on(sv.robo) {
            Assignment::Robo
        } else {
            Assignment::Leave
        };
        for t in s.arrival..s.departure {
            let k = t - s.arrival;
            let plugged = on(sv.plug[k]) && schedule.assignments[i] != Assignment::Leave;
            schedule.plug[i][t] = plugged;
            schedule.power[i][t] = if plugged {
                values[sv.power[k].index()].clamp(0.0, s.max_power)
            } else {
                0.0
            };
        }
        fill_trajectories(&mut schedule, i, s, grid, eta);
        let count = |expr: &crate::milp::LinExpr| expr.evaluate(values).round().max(0.0) as usize;
        schedule.queues[i] = QueueState {
            q_fix: count(&sv.q_fix),
            q_robo: sv.q_robo.as_ref().map_or(0, count),
            v_fix: count(&sv.v_fix),
            v_robo: sv.v_robo.as_ref().map_or(0, count),
        };
    }
    // Queues that could not bind were left out of the model; fill in their
    // diagnostics from the extracted trajectories.
    for (i, sv) in block.sessions.iter().enumerate() {
        if sv.q_robo.is_none() {
            let replayed = queue_state(&schedule, problem, i);
            schedule.queues[i].q_robo = replayed.q_robo;
            schedule.queues[i].v_robo = replayed.v_robo;
        }
    }
    finish_schedule(&mut schedule, problem);
    schedule
}

/// Queue lengths and vacancies met by session `i` on arrival, read from the
/// assignments of earlier sessions and their charge at that step.
pub(crate) fn queue_state(schedule: &Schedule, problem: &OperationProblem<'_>, i: usize) -> QueueState {
    let sessions = &problem.scenario.sessions;
    let eps = problem.options.full_charge_eps;
    let t = sessions[i].arrival;
    let mut q_fix = 0;
    let mut q_robo = 0;
    for j in (0..i).filter(|&j| sessions[j].is_present(t)) {
        match schedule.assignments[j] {
            Assignment::Fix => q_fix += 1,
            Assignment::Robo
                if sessions[j].demand > eps && sessions[j].target_charge - schedule.charge[j][t] >= eps / 2.0 =>
            {
                q_robo += 1
            }
            _ => {}
        }
    }
    let k = problem
        .tolerance_of(&sessions[i])
        .queue_capacity(problem.station.rc_count, sessions.len());
    QueueState {
        q_fix,
        q_robo,
        v_fix: problem.station.fc_count.saturating_sub(q_fix),
        v_robo: k.saturating_sub(q_robo),
    }
}

/// Recomputes charge from power, trimming any overshoot of the target, and
/// spreads curtailed power backwards from departure so the virtual charge
/// ends at the target (or at the initial charge for a PEV that leaves).
pub(crate) fn fill_trajectories(schedule: &mut Schedule, i: usize, s: &Session, grid: &TimeGrid, eta: f64) {
    let steps = grid.step_count();
    let leaving = schedule.assignments[i] == Assignment::Leave;
    let goal = if leaving { s.init_charge } else { s.target_charge };
    let mut e = s.init_charge;
    for t in 0..steps {
        let dt = grid.step_length(t);
        let p = if !s.is_present(t) || leaving {
            0.0
        } else {
            schedule.power[i][t].min(((goal - e) / (eta * dt)).max(0.0))
        };
        schedule.power[i][t] = p;
        schedule.curtailed[i][t] = 0.0;
        e += eta * p * dt;
    }
    let mut missing = (goal - e).max(0.0);
    for t in (s.arrival..s.departure).rev() {
        if missing <= 0.0 {
            break;
        }
        let dt = grid.step_length(t);
        let pc = (s.max_power - schedule.power[i][t]).min(missing / (eta * dt)).max(0.0);
        schedule.curtailed[i][t] = pc;
        missing -= eta * pc * dt;
    }
    let (mut e, mut ev) = (s.init_charge, s.init_charge);
    for t in 0..steps {
        schedule.charge[i][t] = e;
        schedule.virtual_charge[i][t] = ev;
        let dt = grid.step_length(t);
        e += eta * schedule.power[i][t] * dt;
        ev += eta * (schedule.power[i][t] + schedule.curtailed[i][t]) * dt;
    }
    schedule.charge[i][steps] = e;
    schedule.virtual_charge[i][steps] = ev;
}

/// Fills the derived fields (switches, peak, disappointment) from the
/// plug, power and charge matrices.
pub(crate) fn finish_schedule(schedule: &mut Schedule, problem: &OperationProblem<'_>) {
    let steps = schedule.grid.step_count();
    for (i, s) in problem.scenario.sessions.iter().enumerate() {
        for t in 0..steps.saturating_sub(1) {
            schedule.switches[i][t] = schedule.plug[i][t] != schedule.plug[i][t + 1];
        }
        schedule.disappointment[i] = disappointment_of(schedule, i, s, problem.tariff);
    }
    let load = schedule.aggregate_power();
    schedule.peak_power = load
        .iter()
        .zip(&problem.station.base_load)
        .map(|(p, b)| p + b)
        .fold(problem.options.demand_charge_floor, f64::max);
}

pub(crate) fn disappointment_of(
    schedule: &Schedule,
    i: usize,
    s: &crate::domain::Session,
    tariff: &TariffAndCosts,
) -> f64 {
    if schedule.assignments[i] == Assignment::Leave {
        return 0.0;
    }
    let (base_init, base_demand) = s.penalty_basis();
    let delivered = schedule.charge[i][s.departure] - base_init;
    tariff
        .unsat_penalties
        .iter()
        .map(|tier| tier.rate * (tier.threshold * base_demand - delivered).max(0.0))
        .sum()
}

#[cfg(test)]
mod tests;
