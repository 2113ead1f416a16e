//! HiGHS backend: one synchronous call per model.

use std::time::Instant;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};

use super::{Cmp, Model, VarKind};
use crate::error::MilpError;

/// Integrality/feasibility tolerance for returned assignments.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative MIP gap at which the search stops.
    pub mip_gap: f64,
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    pub seed: i32,
    /// Solver threads; `None` leaves the backend default.
    pub threads: Option<u32>,
    /// Share of search effort spent on primal heuristics; `None` keeps the
    /// backend default.
    #[serde(default)]
    pub heuristic_effort: Option<f64>,
    /// Echo the backend log to the console.
    #[serde(default)]
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mip_gap: 0.01,
            time_limit: 120.0,
            seed: 0,
            threads: None,
            heuristic_effort: None,
            verbose: false,
        }
    }
}

impl SolveOptions {
    pub fn exact() -> Self {
        Self {
            mip_gap: 0.0,
            ..Self::default()
        }
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.mip_gap = gap;
        self
    }

    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit = seconds;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Stopped on a limit with an incumbent of the given relative gap.
    Feasible { gap: f64 },
    Infeasible,
    /// Stopped on a limit without any incumbent.
    TimeLimit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub gap: f64,
    pub wall_time: f64,
}

impl SolveResult {
    pub fn value(&self, v: super::Var) -> f64 {
        self.values[v.index()]
    }

    pub fn is_set(&self, v: super::Var) -> bool {
        self.values[v.index()] > 0.5
    }

    pub(crate) fn infeasible(wall_time: f64) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            objective: f64::INFINITY,
            values: Vec::new(),
            gap: f64::INFINITY,
            wall_time,
        }
    }
}

/// Solves `model` with HiGHS. Infeasibility and limits are statuses, not
/// errors; only backend failures are reported as `Err`.
pub fn solve(model: &Model, options: &SolveOptions) -> Result<SolveResult, MilpError> {
    solve_from(model, options, None)
}

/// [`solve`] with an optional starting point. A start that violates the
/// model is ignored; a feasible one is kept if the search finds nothing
/// better.
pub fn solve_from(model: &Model, options: &SolveOptions, start: Option<&[f64]>) -> Result<SolveResult, MilpError> {
    let started = Instant::now();
    let objective = model.compact_objective();

    // Constant rows never reach the backend; HiGHS rejects some of them.
    for c in model.constraints().iter().filter(|c| c.terms.is_empty()) {
        if c.violation(&[]) > FEASIBILITY_TOL {
            return Ok(SolveResult::infeasible(started.elapsed().as_secs_f64()));
        }
    }
    if model.vars().iter().any(|d| d.lower > d.upper) {
        return Ok(SolveResult::infeasible(started.elapsed().as_secs_f64()));
    }
    if model.num_vars() == 0 {
        return Ok(SolveResult {
            status: SolveStatus::Optimal,
            objective: objective.constant,
            values: Vec::new(),
            gap: 0.0,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }

    let mut costs = vec![0.0; model.num_vars()];
    for (v, c) in &objective.terms {
        costs[v.index()] += c;
    }
    let mut pb = RowProblem::default();
    let cols: Vec<_> = model
        .vars()
        .iter()
        .zip(&costs)
        .map(|(d, &cost)| {
            let integral = d.kind != VarKind::Continuous;
            pb.add_column_with_integrality(cost, d.lower..=d.upper, integral)
        })
        .collect();
    for c in model.constraints().iter().filter(|c| !c.terms.is_empty()) {
        let factors: Vec<_> = c.terms.iter().map(|(v, k)| (cols[v.index()], *k)).collect();
        match c.cmp {
            Cmp::Le => pb.add_row(..=c.rhs, factors),
            Cmp::Ge => pb.add_row(c.rhs.., factors),
            Cmp::Eq => pb.add_row(c.rhs..=c.rhs, factors),
        }
    }

    let mut hm = pb
        .try_optimise(Sense::Minimise)
        .map_err(|s| MilpError::Backend(format!("model rejected: {s:?}")))?;
    if options.verbose {
        let _ = hm.try_set_option("output_flag", true);
        let _ = hm.try_set_option("log_to_console", true);
    }
    let set = |hm: &mut highs::Model, key: &str, v: f64| {
        hm.try_set_option(key, v)
            .map_err(|e| MilpError::Backend(format!("option {key}: {e:?}")))
    };
    if let Some(effort) = options.heuristic_effort {
        set(&mut hm, "mip_heuristic_effort", effort.clamp(0.0, 1.0))?;
    }
    let start = start.filter(|x| x.len() == model.num_vars() && model.is_feasible(x, FEASIBILITY_TOL));
    if let Some(x) = start {
        if hm.try_set_solution(Some(x), None, None, None).is_err() {
            log::debug!("backend refused the starting point");
        }
    }
    set(&mut hm, "mip_rel_gap", options.mip_gap.max(0.0))?;
    set(&mut hm, "time_limit", options.time_limit.max(0.0))?;
    hm.try_set_option("random_seed", options.seed.max(0))
        .map_err(|e| MilpError::Backend(format!("option random_seed: {e:?}")))?;
    if let Some(t) = options.threads {
        hm.try_set_option("threads", t.max(1) as i32)
            .map_err(|e| MilpError::Backend(format!("option threads: {e:?}")))?;
    }

    let solved = hm
        .try_solve()
        .map_err(|s| MilpError::Backend(format!("run failed: {s:?}")))?;
    let wall_time = started.elapsed().as_secs_f64();
    let status = solved.status();
    let has_incumbent = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
    let is_mip = model.num_integral() > 0;
    let reported_gap = if is_mip { solved.mip_gap() } else { 0.0 };

    let status = match status {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
        HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
            return Ok(SolveResult::infeasible(wall_time));
        }
        HighsModelStatus::ReachedTimeLimit
        | HighsModelStatus::ReachedIterationLimit
        | HighsModelStatus::ReachedSolutionLimit
        | HighsModelStatus::ReachedInterrupt
        | HighsModelStatus::ReachedMemoryLimit => {
            if has_incumbent {
                SolveStatus::Feasible { gap: reported_gap }
            } else if let Some(x) = start {
                return Ok(SolveResult {
                    status: SolveStatus::Feasible { gap: f64::INFINITY },
                    objective: objective.evaluate(x),
                    values: x.to_vec(),
                    gap: f64::INFINITY,
                    wall_time,
                });
            } else {
                return Ok(SolveResult {
                    status: SolveStatus::TimeLimit,
                    objective: f64::INFINITY,
                    values: Vec::new(),
                    gap: f64::INFINITY,
                    wall_time,
                });
            }
        }
        other => return Err(MilpError::Backend(format!("unexpected model status {other:?}"))),
    };

    let mut values = solved.get_solution().columns().to_vec();
    for (x, d) in values.iter_mut().zip(model.vars()) {
        if d.kind.is_integral() {
            *x = x.round();
        }
        *x = x.clamp(d.lower, d.upper);
    }
    let mut objective_value = objective.evaluate(&values);
    if let Some(x) = start {
        let start_value = objective.evaluate(x);
        if start_value < objective_value - FEASIBILITY_TOL * objective_value.abs().max(1.0) {
            values = x.to_vec();
            objective_value = start_value;
        }
    }
    Ok(SolveResult {
        status,
        objective: objective_value,
        values,
        gap: if reported_gap.is_finite() { reported_gap.max(0.0) } else { 0.0 },
        wall_time,
    })
}

/// Completes a partial assignment: fixes the given variables, optimises the
/// rest and returns the full vector, or `None` when the fixing is infeasible.
pub fn complete_assignment(
    model: &Model,
    fixed: &[(super::Var, f64)],
    options: &SolveOptions,
) -> Result<Option<Vec<f64>>, MilpError> {
    let mut m = model.clone();
    for &(v, x) in fixed {
        let d = m.var(v);
        let x = if d.kind.is_integral() { x.round() } else { x };
        m.fix(v, x.clamp(d.lower, d.upper));
    }
    let r = solve(&m, options)?;
    Ok(r.status.has_solution().then_some(r.values))
}
