//! Procedural checker for schedules. It replays the arrivals in queue order
//! and re-derives every quantity from the raw matrices without touching the
//! MILP, so it can serve as an oracle for the solver output.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::OperationProblem;
use crate::domain::{Assignment, ChargerType, Schedule};

const TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    Shape,
    Assignment,
    Plug,
    Power,
    Energy,
    Capacity,
    QueueLaw,
    Peak,
    Switch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub session: Option<usize>,
    pub step: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(i) = self.session {
            write!(f, " session {i}")?;
        }
        if let Some(t) = self.step {
            write!(f, " step {t}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, session: Option<usize>, step: Option<usize>, detail: String) {
        self.violations.push(Violation {
            kind,
            session,
            step,
            detail,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * 1f64.max(a.abs()).max(b.abs())
}

/// Checks `schedule` against the operation rules for `problem`. An empty
/// report means the schedule is feasible.
pub fn validate_schedule(schedule: &Schedule, problem: &OperationProblem<'_>) -> ValidationReport {
    use ViolationKind::{Capacity, Energy, Peak, Plug, Power, QueueLaw, Shape, Switch};
    let mut report = ValidationReport::default();
    let sessions = &problem.scenario.sessions;
    let steps = problem.grid.step_count();
    let (m, n) = (problem.station.fc_count, problem.station.rc_count);
    let eta = problem.station.efficiency;
    let eps = problem.options.full_charge_eps;

    let rows_ok = |rows: &Vec<Vec<bool>>, w: usize| rows.len() == sessions.len() && rows.iter().all(|r| r.len() == w);
    let frows_ok = |rows: &Vec<Vec<f64>>, w: usize| rows.len() == sessions.len() && rows.iter().all(|r| r.len() == w);
    if schedule.assignments.len() != sessions.len()
        || schedule.grid.step_count() != steps
        || !rows_ok(&schedule.plug, steps)
        || !frows_ok(&schedule.power, steps)
        || !frows_ok(&schedule.curtailed, steps)
        || !frows_ok(&schedule.charge, steps + 1)
        || !frows_ok(&schedule.virtual_charge, steps + 1)
        || !rows_ok(&schedule.switches, steps.saturating_sub(1))
        || schedule.queues.len() != sessions.len()
    {
        report.push(Shape, None, None, "matrix dimensions do not match the scenario".into());
        return report;
    }

    for (i, s) in sessions.iter().enumerate() {
        let a = schedule.assignments[i];
        if let Some(pre) = s.preassigned {
            if a.charger() != Some(pre) {
                report.push(ViolationKind::Assignment, Some(i), None, format!("preassigned {pre} but got {a:?}"));
            }
        }
        if a == Assignment::Robo && n == 0 {
            report.push(ViolationKind::Assignment, Some(i), None, "robo assignment without robo-chargers".into());
        }
        if a == Assignment::Fix && m == 0 {
            report.push(ViolationKind::Assignment, Some(i), None, "fixed assignment without fixed chargers".into());
        }

        let mut e = s.init_charge;
        let mut ev = s.init_charge;
        for t in 0..steps {
            let present = s.is_present(t);
            let plug = schedule.plug[i][t];
            let p = schedule.power[i][t];
            let pc = schedule.curtailed[i][t];
            if plug && (!present || a == Assignment::Leave) {
                report.push(Plug, Some(i), Some(t), "plugged while absent or after leaving".into());
            }
            if present && a == Assignment::Fix && !plug {
                report.push(Plug, Some(i), Some(t), "fixed-charger PEV unplugged while present".into());
            }
            let cap = if plug { s.max_power } else { 0.0 };
            if p < -TOL || p > cap + TOL {
                report.push(Power, Some(i), Some(t), format!("power {p} outside [0, {cap}]"));
            }
            let vcap = if present { s.max_power } else { 0.0 };
            if pc < -TOL || p + pc > vcap + TOL {
                report.push(Power, Some(i), Some(t), format!("curtailed power {pc} exceeds the limit"));
            }
            if !close(schedule.charge[i][t], e) {
                report.push(Energy, Some(i), Some(t), format!("charge {} expected {e}", schedule.charge[i][t]));
            }
            if !close(schedule.virtual_charge[i][t], ev) {
                report.push(
                    Energy,
                    Some(i),
                    Some(t),
                    format!("virtual charge {} expected {ev}", schedule.virtual_charge[i][t]),
                );
            }
            let dt = problem.grid.step_length(t);
            e += eta * p * dt;
            ev += eta * (p + pc) * dt;
        }
        if !close(schedule.charge[i][steps], e) {
            report.push(Energy, Some(i), Some(steps), "final charge mismatch".into());
        }
        let expected_end = if a == Assignment::Leave {
            s.init_charge
        } else {
            s.target_charge
        };
        let end = schedule.virtual_charge[i][s.departure];
        if (end - expected_end).abs() > TOL * 1f64.max(s.target_charge.abs()) {
            report.push(
                Energy,
                Some(i),
                Some(s.departure),
                format!("virtual charge at departure {end}, expected {expected_end}"),
            );
        }
        if schedule.charge[i][s.departure] > s.target_charge + TOL * 1f64.max(s.target_charge) {
            report.push(Energy, Some(i), None, "charged beyond target".into());
        }

        for t in 0..steps.saturating_sub(1) {
            if schedule.switches[i][t] != (schedule.plug[i][t] != schedule.plug[i][t + 1]) {
                report.push(Switch, Some(i), Some(t), "switch flag disagrees with plug change".into());
            }
        }
    }

    // capacity
    for t in 0..steps {
        let fc = (0..sessions.len())
            .filter(|&i| sessions[i].is_present(t) && schedule.assignments[i] == Assignment::Fix)
            .count();
        let rc = (0..sessions.len())
            .filter(|&i| schedule.plug[i][t] && schedule.assignments[i] == Assignment::Robo)
            .count();
        if fc > m {
            report.push(Capacity, None, Some(t), format!("{fc} PEVs on {m} fixed chargers"));
        }
        if rc > n {
            report.push(Capacity, None, Some(t), format!("{rc} PEVs on {n} robo-chargers"));
        }
    }

    // leave-or-wait replay
    for (i, s) in sessions.iter().enumerate() {
        let t = s.arrival;
        let q_fix = (0..i)
            .filter(|&j| sessions[j].is_present(t) && schedule.assignments[j] == Assignment::Fix)
            .count();
        let q_robo = (0..i)
            .filter(|&j| {
                let o = &sessions[j];
                o.is_present(t)
                    && schedule.assignments[j] == Assignment::Robo
                    && o.demand > eps
                    && o.target_charge - schedule.charge[j][t] >= eps / 2.0
            })
            .count();
        let k = problem.tolerance_of(s).queue_capacity(n, sessions.len());
        let v_fix = m.saturating_sub(q_fix);
        let v_robo = k.saturating_sub(q_robo);
        let leaves = v_fix + v_robo == 0;
        if s.preassigned.is_none() && leaves != (schedule.assignments[i] == Assignment::Leave) {
            report.push(
                QueueLaw,
                Some(i),
                Some(t),
                format!(
                    "vacancies fix={v_fix} robo={v_robo} but assignment is {:?}",
                    schedule.assignments[i]
                ),
            );
        }
        let q = schedule.queues[i];
        if (q.q_fix, q.q_robo, q.v_fix, q.v_robo) != (q_fix, q_robo, v_fix, v_robo) {
            report.push(
                QueueLaw,
                Some(i),
                Some(t),
                format!(
                    "reported queues {:?} differ from replay (q_fix={q_fix}, q_robo={q_robo}, v_fix={v_fix}, v_robo={v_robo})",
                    q
                ),
            );
        }
        if let (None, Some(ChargerType::Fix)) = (s.preassigned, schedule.assignments[i].charger()) {
            if v_fix == 0 {
                report.push(QueueLaw, Some(i), Some(t), "assigned to a full fixed-charger bank".into());
            }
        }
    }

    let load = schedule.aggregate_power();
    let actual = load
        .iter()
        .zip(&problem.station.base_load)
        .map(|(p, b)| p + b)
        .fold(problem.options.demand_charge_floor, f64::max);
    if !close(schedule.peak_power, actual) {
        report.push(Peak, None, None, format!("peak {} but load reaches {actual}", schedule.peak_power));
    }
    report
}
