use super::{disappointment_of, OperationProblem};
use crate::domain::{CostBreakdown, Schedule};

/// Recomputes the OPEX breakdown of `schedule` from its raw matrices,
/// independently of any solver objective. CAPEX is left at zero.
pub fn reprice(schedule: &Schedule, problem: &OperationProblem<'_>) -> CostBreakdown {
    let grid = &schedule.grid;
    let tariff = problem.tariff;
    let mut tou = 0.0;
    let mut fee = 0.0;
    for row in &schedule.power {
        for (t, p) in row.iter().enumerate() {
            let energy = p * grid.step_length(t);
            tou += tariff.tou[t] * energy;
            fee += tariff.fee * energy;
        }
    }
    let peak = schedule
        .aggregate_power()
        .iter()
        .zip(&problem.station.base_load)
        .map(|(p, b)| p + b)
        .fold(problem.options.demand_charge_floor, f64::max);
    let demand = problem.demand_charge_rate() * peak;
    let switches = schedule.switches.iter().flatten().filter(|s| **s).count();
    let switching = tariff.switch_cost * switches as f64;
    let disappointment = problem
        .scenario
        .sessions
        .iter()
        .enumerate()
        .map(|(i, s)| disappointment_of(schedule, i, s, tariff))
        .sum();
    CostBreakdown::new(tou, fee, demand, switching, disappointment, 0.0)
}
