//! Causal greedy dispatch. Arrivals follow the leave-or-wait rule, fixed
//! chargers charge at full power from plug-in, and robo-chargers serve the
//! unfinished PEVs with the earliest departures. The result is always a
//! feasible schedule, used as a starting point for the MILP and as a
//! baseline.

use serde::{Deserialize, Serialize};

use super::{fill_trajectories, finish_schedule, queue_state, OperationProblem};
use crate::domain::{Assignment, ChargerType, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DispatchRule {
    /// Take a free fixed charger when there is one.
    FixFirst,
    /// Join the robo-charger queue when it has room.
    RoboFirst,
}

pub fn dispatch(problem: &OperationProblem<'_>, rule: DispatchRule) -> Schedule {
    let sessions = &problem.scenario.sessions;
    let grid = problem.grid;
    let eta = problem.station.efficiency;
    let n = problem.station.rc_count;
    let mut schedule = Schedule::all_leave(
        problem.scenario,
        grid,
        problem.station.fc_count,
        problem.station.rc_count,
    );
    let mut charge: Vec<f64> = sessions.iter().map(|s| s.init_charge).collect();
    let mut next = 0;
    for t in 0..grid.step_count() {
        for (i, e) in charge.iter().enumerate() {
            schedule.charge[i][t] = *e;
        }
        while next < sessions.len() && sessions[next].arrival == t {
            let i = next;
            next += 1;
            let q = queue_state(&schedule, problem, i);
            schedule.assignments[i] = match (sessions[i].preassigned, rule) {
                (Some(ChargerType::Fix), _) => Assignment::Fix,
                (Some(ChargerType::Robo), _) => Assignment::Robo,
                _ if q.v_fix + q.v_robo == 0 => Assignment::Leave,
                (None, DispatchRule::FixFirst) if q.v_fix > 0 => Assignment::Fix,
                (None, DispatchRule::FixFirst) => Assignment::Robo,
                (None, DispatchRule::RoboFirst) if q.v_robo > 0 && n > 0 => Assignment::Robo,
                (None, DispatchRule::RoboFirst) if q.v_fix > 0 => Assignment::Fix,
                (None, DispatchRule::RoboFirst) => Assignment::Robo,
            };
            schedule.queues[i] = q;
        }

        let dt = grid.step_length(t);
        let mut waiting: Vec<usize> = Vec::new();
        for (i, s) in sessions.iter().enumerate() {
            if !s.is_present(t) {
                continue;
            }
            match schedule.assignments[i] {
                Assignment::Fix => {
                    schedule.plug[i][t] = true;
                    schedule.power[i][t] = s.max_power.min((s.target_charge - charge[i]).max(0.0) / (eta * dt));
                }
                Assignment::Robo if s.target_charge - charge[i] > 0.0 => waiting.push(i),
                _ => {}
            }
        }
        waiting.sort_by_key(|&i| (sessions[i].departure, i));
        for &i in waiting.iter().take(n) {
            let s = &sessions[i];
            schedule.plug[i][t] = true;
            schedule.power[i][t] = s.max_power.min((s.target_charge - charge[i]) / (eta * dt));
        }
        for (i, e) in charge.iter_mut().enumerate() {
            *e += eta * schedule.power[i][t] * dt;
        }
    }
    for (i, s) in sessions.iter().enumerate() {
        fill_trajectories(&mut schedule, i, s, grid, eta);
    }
    finish_schedule(&mut schedule, problem);
    schedule
}
