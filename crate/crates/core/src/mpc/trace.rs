use std::collections::HashMap;
use std::io::Write;

use crate::domain::{Assignment, ChargerType, CostBreakdown, Schedule};
use crate::error::Result;
use crate::operation::{finish_schedule, reprice, OperationProblem};
use crate::stochastic::TraceSession;

use super::{MpcParams, OfflineInstance, SiteProfile, StepRecord, StepSource};

/// What the controller actually did over a run, on the fine grid.
#[derive(Debug, Clone)]
pub struct ExecutedRun {
    /// Realised sessions: actual departures, targets capped by the
    /// registered stay.
    pub instance: OfflineInstance,
    pub schedule: Schedule,
    pub records: Vec<StepRecord>,
    /// Whole-run costs in ¢, CAPEX for the run's days included.
    pub costs: CostBreakdown,
    pub days: f64,
}

impl ExecutedRun {
    pub(crate) fn assemble(
        trace: &[TraceSession],
        site: &SiteProfile,
        params: &MpcParams,
        steps: usize,
        records: Vec<StepRecord>,
    ) -> Result<Self> {
        let instance = OfflineInstance::new(trace, site, steps)?;
        let sessions = &instance.scenario.sessions;
        let index: HashMap<usize, usize> = sessions.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        let mut schedule = Schedule::all_leave(
            &instance.scenario,
            &instance.grid,
            site.station.fc_count,
            site.station.rc_count,
        );
        for r in &records {
            for &(id, stayed) in &r.arrivals {
                if stayed {
                    // admitted but possibly never served: waited in the robo queue
                    schedule.assignments[index[&id]] = Assignment::Robo;
                }
            }
            for a in &r.actions {
                let i = index[&a.id];
                schedule.assignments[i] = match a.charger {
                    Some(ChargerType::Fix) => Assignment::Fix,
                    Some(ChargerType::Robo) | None => Assignment::Robo,
                };
                schedule.plug[i][r.step] = a.plug;
                schedule.power[i][r.step] = a.power;
            }
        }
        let eta = site.station.efficiency;
        for (i, s) in sessions.iter().enumerate() {
            let mut e = s.init_charge;
            for t in 0..steps {
                schedule.charge[i][t] = e;
                schedule.virtual_charge[i][t] = e;
                e += eta * schedule.power[i][t] * instance.grid.step_length(t);
            }
            schedule.charge[i][steps] = e;
            schedule.virtual_charge[i][steps] = e;
        }
        let problem = instance.problem();
        finish_schedule(&mut schedule, &problem);
        let base = reprice(&schedule, &problem);
        let days = steps as f64 * site.fine_dt / 24.0;
        let demand = billing_demand(&schedule, &instance, params, site);
        let capex = site.tariff.capex_cents_per_day(site.station.fc_count, site.station.rc_count) * days;
        let costs = CostBreakdown::new(base.tou, base.fee, demand, base.switching, base.disappointment, capex);
        Ok(Self {
            instance,
            schedule,
            records,
            costs,
            days,
        })
    }

    pub fn problem(&self) -> OperationProblem<'_> {
        self.instance.problem()
    }

    /// Charger capacity and power-limit breaches, replayed from the step
    /// records. PEVs count on a charger from the step they were given one.
    pub fn hardware_violations(&self, site: &SiteProfile) -> Vec<String> {
        let (m, n) = (site.station.fc_count, site.station.rc_count);
        let mut out = Vec::new();
        for r in &self.records {
            let fix = r.actions.iter().filter(|a| a.charger == Some(ChargerType::Fix)).count();
            let robo = r
                .actions
                .iter()
                .filter(|a| a.plug && a.charger == Some(ChargerType::Robo))
                .count();
            if fix > m {
                out.push(format!("step {}: {fix} PEVs on {m} fixed chargers", r.step));
            }
            if robo > n {
                out.push(format!("step {}: {robo} PEVs plugged by {n} robo-chargers", r.step));
            }
            for a in &r.actions {
                let cap = if a.plug && a.charger.is_some() { site.max_power } else { 0.0 };
                if a.power < -1e-9 || a.power > cap + 1e-9 {
                    out.push(format!("step {}: PEV {} draws {} kW, limit {cap}", r.step, a.id, a.power));
                }
            }
        }
        out
    }

    /// Daily averages of the run costs.
    pub fn daily_costs(&self) -> CostBreakdown {
        let d = self.days.max(f64::MIN_POSITIVE);
        let c = &self.costs;
        CostBreakdown::new(c.tou / d, c.fee / d, c.demand / d, c.switching / d, c.disappointment / d, c.capex / d)
    }

    /// Arrivals that left without charging.
    pub fn balked(&self) -> usize {
        self.records.iter().flat_map(|r| &r.arrivals).filter(|(_, stayed)| !stayed).count()
    }

    /// Steps whose actions did not come from a fresh solve.
    pub fn fallback_steps(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r.source, StepSource::ShiftedPlan | StepSource::Greedy))
            .count()
    }
}

/// Demand charge summed over billing cycles, each billed pro rata for the
/// hours of the run it covers.
fn billing_demand(schedule: &Schedule, instance: &OfflineInstance, params: &MpcParams, site: &SiteProfile) -> f64 {
    let load: Vec<f64> = schedule
        .aggregate_power()
        .iter()
        .zip(&instance.station.base_load)
        .map(|(p, b)| p + b)
        .collect();
    let cycle = ((params.billing_cycle_days * 24.0 / site.fine_dt).round() as usize).max(1);
    load.chunks(cycle)
        .map(|c| {
            let peak = c.iter().copied().fold(0.0, f64::max);
            site.tariff.demand_charge_cents(c.len() as f64 * site.fine_dt) * peak
        })
        .sum()
}

/// Long-format step log: one `arrive`/`balk`/`depart` row per event and one
/// `step` row per onsite PEV per step.
pub fn write_trace_csv<W: Write>(run: &ExecutedRun, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "session", "event", "charger", "plug", "power_kw", "charge_kwh", "peak_kw"])?;
    let name = |c: Option<ChargerType>| match c {
        Some(ChargerType::Fix) => "fix",
        Some(ChargerType::Robo) => "robo",
        None => "",
    };
    for r in &run.records {
        let step = r.step.to_string();
        let peak = format!("{:.4}", r.peak);
        for id in &r.departures {
            w.write_record([step.as_str(), &id.to_string(), "depart", "", "", "", "", &peak])?;
        }
        for (id, stayed) in &r.arrivals {
            let event = if *stayed { "arrive" } else { "balk" };
            w.write_record([step.as_str(), &id.to_string(), event, "", "", "", "", &peak])?;
        }
        for a in &r.actions {
            w.write_record([
                step.as_str(),
                &a.id.to_string(),
                "step",
                name(a.charger),
                if a.plug { "1" } else { "0" },
                &format!("{:.4}", a.power),
                &format!("{:.4}", a.charge),
                &peak,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
