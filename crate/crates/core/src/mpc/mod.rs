//! Rolling-horizon operation: the controller keeps a log of onsite PEVs,
//! re-solves a coarsened operation model every fine step and executes the
//! first step of the plan. A small simulator around it decides whether
//! arriving drivers stay and when they actually leave.

mod horizon;
mod predict;
mod sim;
mod trace;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use horizon::{build_onsite_view, merge_forecast, CoarseGrid, HorizonBlock, SiteProfile};
pub use predict::{CompleteInformation, ForecastSession, NaivePredictor, NoForecast, Predictor};
pub use sim::{simulate, ForecastMode, SimSpec, Simulation};
pub use trace::{write_trace_csv, ExecutedRun};

use crate::domain::{ChargerType, DemandScenario, Schedule, Tolerance};
use crate::error::{Error, Result};
use crate::milp::SolveOptions;
use crate::operation::{dispatch, solve_operation, DispatchRule, OperationOptions, OperationProblem, FULL_CHARGE_EPS};
use crate::stochastic::{stay_decision, BehaviorParams, SimRng, TraceSession};

/// One onsite PEV as the controller tracks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Trace id.
    pub id: usize,
    pub arrival: usize,
    /// Departure the controller plans with.
    pub departure_hint: usize,
    /// Departure the simulator will enforce.
    pub actual_departure: usize,
    pub init_charge: f64,
    /// Target reachable within the registered stay.
    pub target_charge: f64,
    /// Target as requested; penalties refer to it.
    pub original_target: f64,
    pub max_power: f64,
    /// `None` until the controller first assigns a charger.
    pub charger: Option<ChargerType>,
    /// Charger type the queue counts this PEV under while unassigned.
    pub counted_as: ChargerType,
    pub charge: f64,
}

impl LogEntry {
    fn queue_type(&self) -> ChargerType {
        self.charger.unwrap_or(self.counted_as)
    }

    fn is_full(&self) -> bool {
        self.target_charge - self.init_charge <= FULL_CHARGE_EPS || self.target_charge - self.charge < FULL_CHARGE_EPS / 2.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationLog {
    pub entries: Vec<LogEntry>,
}

impl StationLog {
    /// Removes PEVs whose actual departure is at or before `t` and returns them.
    pub fn remove_departed(&mut self, t: usize) -> Vec<LogEntry> {
        let (gone, stay) = std::mem::take(&mut self.entries)
            .into_iter()
            .partition(|e| e.actual_departure <= t);
        self.entries = stay;
        gone
    }

    /// `(q_fix, q_robo)` seen by an arrival now: PEVs on (or counted on) fixed
    /// chargers, and unfinished PEVs on robo-chargers.
    pub fn queues(&self) -> (usize, usize) {
        let q_fix = self.entries.iter().filter(|e| e.queue_type() == ChargerType::Fix).count();
        let q_robo = self
            .entries
            .iter()
            .filter(|e| e.queue_type() == ChargerType::Robo && !e.is_full())
            .count();
        (q_fix, q_robo)
    }
}

/// Peak aggregate load observed in the current billing cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BillingMemory {
    pub cycle_steps: usize,
    pub cycle_start: usize,
    pub peak: f64,
}

impl BillingMemory {
    pub fn new(cycle_steps: usize) -> Self {
        Self {
            cycle_steps: cycle_steps.max(1),
            cycle_start: 0,
            peak: 0.0,
        }
    }

    /// Steps of the cycle containing the last queried step that fall before
    /// `end`; the peak is billed pro rata for this stretch.
    pub fn billed_steps(&self, end: usize) -> usize {
        (self.cycle_start + self.cycle_steps).min(end).saturating_sub(self.cycle_start)
    }

    /// Peak so far, after rolling over to the cycle containing `t`.
    pub fn floor_at(&mut self, t: usize) -> f64 {
        if t >= self.cycle_start + self.cycle_steps {
            self.cycle_start = t - (t - self.cycle_start) % self.cycle_steps;
            self.peak = 0.0;
        }
        self.peak
    }

    pub fn observe(&mut self, t: usize, load: f64) {
        self.floor_at(t);
        self.peak = self.peak.max(load);
    }
}

/// How the simulator decides whether an arriving driver stays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum StayRule {
    /// The operation model's rule: stay iff some vacancy is left.
    Deterministic,
    /// Stay with probability `1 / (1 + a·e^{−b·v})`.
    Sigmoid(BehaviorParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcParams {
    pub horizon: Vec<HorizonBlock>,
    /// Solver budget per step, seconds.
    pub step_budget: f64,
    pub mip_gap: f64,
    pub billing_cycle_days: f64,
    /// Plan with actual rather than registered departures.
    pub known_departures: bool,
    pub seed: i32,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            horizon: CoarseGrid::standard_blocks(),
            step_budget: 10.0,
            mip_gap: 0.01,
            billing_cycle_days: 30.0,
            known_departures: false,
            seed: 0,
        }
    }
}

impl MpcParams {
    fn solver(&self) -> SolveOptions {
        SolveOptions {
            mip_gap: self.mip_gap,
            time_limit: self.step_budget,
            seed: self.seed,
            threads: Some(1),
            ..SolveOptions::default()
        }
    }
}

/// How the actions of a step were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSource {
    /// Nobody on site.
    Idle,
    Solved { gap: f64 },
    /// Previous plan shifted by the elapsed steps.
    ShiftedPlan,
    /// Greedy dispatch of the current view.
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub id: usize,
    pub charger: Option<ChargerType>,
    pub plug: bool,
    pub power: f64,
    /// Charge after the step.
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Arrivals of the step and whether they stayed.
    pub arrivals: Vec<(usize, bool)>,
    pub departures: Vec<usize>,
    pub actions: Vec<Action>,
    /// Charging plus base load, kW.
    pub load: f64,
    /// Billing-cycle peak after this step, kW.
    pub peak: f64,
    pub source: StepSource,
}

/// Stored plan: per trace id, `(plug, power)` for each fine step from `from`.
#[derive(Debug, Clone, Default)]
struct Plan {
    from: usize,
    actions: HashMap<usize, Vec<(bool, f64)>>,
}

/// Controller state carried between steps.
#[derive(Debug, Clone)]
pub struct Controller {
    pub log: StationLog,
    pub memory: BillingMemory,
    pub params: MpcParams,
    /// First step not billed, when the run length is known.
    pub billing_end: Option<usize>,
    coarse: CoarseGrid,
    plan: Option<Plan>,
}

impl Controller {
    pub fn new(site: &SiteProfile, params: MpcParams) -> Result<Self> {
        site.validate()?;
        let coarse = CoarseGrid::new(site.fine_dt, &params.horizon)?;
        let cycle = (params.billing_cycle_days * 24.0 / site.fine_dt).round() as usize;
        Ok(Self {
            log: StationLog::default(),
            memory: BillingMemory::new(cycle),
            params,
            billing_end: None,
            coarse,
            plan: None,
        })
    }

    pub fn coarse(&self) -> &CoarseGrid {
        &self.coarse
    }

    /// Adds a driver the simulator let in.
    pub fn admit(&mut self, s: &TraceSession, site: &SiteProfile, counted_as: ChargerType) {
        let hint = if self.params.known_departures {
            s.actual_departure
        } else {
            s.declared_departure
        };
        let eta = site.station.efficiency;
        let max_power = site.max_power;
        let window = hint.saturating_sub(s.arrival).max(1) as f64 * site.fine_dt;
        self.log.entries.push(LogEntry {
            id: s.id,
            arrival: s.arrival,
            departure_hint: hint,
            actual_departure: s.actual_departure,
            init_charge: 0.0,
            target_charge: s.energy.min(window * max_power * eta),
            original_target: s.energy,
            max_power,
            charger: None,
            counted_as,
            charge: 0.0,
        });
    }

    /// Plans with the current log and forecast, executes the first fine step
    /// and updates the log and billing memory.
    pub fn step(&mut self, t: usize, site: &SiteProfile, predictor: &dyn Predictor) -> Result<(Vec<Action>, f64, StepSource)> {
        let eta = site.station.efficiency;
        let floor = self.memory.floor_at(t);
        // raising the cycle peak costs its whole billed stretch, not just the horizon
        let billed_hours = self.memory.billed_steps(self.billing_end.unwrap_or(usize::MAX)) as f64 * site.fine_dt;
        let mut decided: Vec<(Option<ChargerType>, bool, f64)> = Vec::new();
        let source = if self.log.entries.is_empty() {
            self.plan = None;
            StepSource::Idle
        } else {
            let onsite = build_onsite_view(&self.log, t, &self.coarse, site.fine_dt, eta)?;
            let forecast = predictor.forecast(t);
            let view = merge_forecast(onsite, &forecast, t, &self.coarse, eta);
            let (station, tariff) = site.coarse_inputs(&self.coarse, t);
            let options = OperationOptions {
                demand_charge_floor: floor,
                demand_charge_rate: Some(site.tariff.demand_charge_cents(billed_hours)),
                ..OperationOptions::default()
            };
            let problem = OperationProblem {
                scenario: &view,
                grid: self.coarse.grid(),
                station: &station,
                tariff: &tariff,
                options: &options,
            };
            match solve_operation(&problem, &self.params.solver()) {
                Ok(out) => {
                    self.store_plan(t, &out.schedule);
                    decided = self.first_step(&out.schedule);
                    StepSource::Solved { gap: out.gap }
                }
                Err(e) => {
                    log::warn!("step {t}: {e}; falling back");
                    match self.shifted_plan(t) {
                        Some(d) => {
                            decided = d;
                            StepSource::ShiftedPlan
                        }
                        None => {
                            let schedule = dispatch(&problem, DispatchRule::FixFirst);
                            self.store_plan(t, &schedule);
                            decided = self.first_step(&schedule);
                            StepSource::Greedy
                        }
                    }
                }
            }
        };

        let dt = site.fine_dt;
        let mut actions = Vec::with_capacity(self.log.entries.len());
        let mut load = site.base_load(t);
        for (k, e) in self.log.entries.iter_mut().enumerate() {
            let (charger, mut plug, power) = decided.get(k).copied().unwrap_or((None, false, 0.0));
            if e.charger.is_none() {
                e.charger = charger;
            }
            if e.charger == Some(ChargerType::Fix) {
                plug = true;
            }
            let room = ((e.target_charge - e.charge) / (eta * dt)).max(0.0);
            let p = if plug { power.clamp(0.0, e.max_power).min(room) } else { 0.0 };
            e.charge = (e.charge + eta * p * dt).min(e.target_charge.max(e.charge));
            load += p;
            actions.push(Action {
                id: e.id,
                charger: e.charger,
                plug,
                power: p,
                charge: e.charge,
            });
        }
        self.memory.observe(t, load);
        Ok((actions, load, source))
    }

    fn first_step(&self, schedule: &Schedule) -> Vec<(Option<ChargerType>, bool, f64)> {
        (0..self.log.entries.len())
            .map(|k| {
                (
                    schedule.assignments[k].charger(),
                    schedule.plug[k][0],
                    schedule.power[k][0],
                )
            })
            .collect()
    }

    fn store_plan(&mut self, t: usize, schedule: &Schedule) {
        let mut actions = HashMap::new();
        for (k, e) in self.log.entries.iter().enumerate() {
            let mut row = Vec::with_capacity(self.coarse.horizon_fine());
            for step in 0..self.coarse.steps() {
                for _ in self.coarse.fine_range(step) {
                    row.push((schedule.plug[k][step], schedule.power[k][step]));
                }
            }
            actions.insert(e.id, row);
        }
        self.plan = Some(Plan { from: t, actions });
    }

    fn shifted_plan(&self, t: usize) -> Option<Vec<(Option<ChargerType>, bool, f64)>> {
        let plan = self.plan.as_ref()?;
        let offset = t - plan.from;
        Some(
            self.log
                .entries
                .iter()
                .map(|e| match plan.actions.get(&e.id).and_then(|row| row.get(offset)) {
                    Some(&(plug, p)) if e.charger.is_some() => (e.charger, plug, p),
                    _ => (e.charger, false, 0.0),
                })
                .collect(),
        )
    }
}

/// Vacancies an arriving driver with tolerance `omega` sees, with the robo
/// term left signed so an over-full queue reads negative.
pub fn vacancies(log: &StationLog, m: usize, n: usize, omega: Tolerance) -> (i64, i64) {
    let (q_fix, q_robo) = log.queues();
    let k = omega.queue_capacity(n, log.entries.len() + 1);
    (m as i64 - q_fix as i64, k as i64 - q_robo as i64)
}

/// Decides every arrival of a step in queue order, admitting stayers into
/// the log. Returns `(id, stayed)` per arrival.
pub fn decide_arrivals(
    controller: &mut Controller,
    arrivals: &[TraceSession],
    site: &SiteProfile,
    rule: &StayRule,
    rng: &mut SimRng,
) -> Vec<(usize, bool)> {
    let (m, n) = (site.station.fc_count, site.station.rc_count);
    arrivals
        .iter()
        .map(|s| {
            let (v_fix, v_robo) = vacancies(&controller.log, m, n, s.tolerance);
            let stays = match rule {
                StayRule::Deterministic => v_fix + v_robo.max(0) > 0,
                StayRule::Sigmoid(p) => {
                    let v = if s.tolerance.is_infinite() && n > 0 { i64::MAX / 4 } else { v_fix + v_robo };
                    stay_decision(v, p, rng)
                }
            };
            if stays {
                let counted = if v_fix > 0 { ChargerType::Fix } else { ChargerType::Robo };
                controller.admit(s, site, counted);
            }
            (s.id, stays)
        })
        .collect()
}

/// Runs the controller over `steps` fine steps of `trace`.
pub fn run_rolling(
    trace: &[TraceSession],
    predictor: &dyn Predictor,
    site: &SiteProfile,
    params: &MpcParams,
    rule: &StayRule,
    steps: usize,
    rng: &mut SimRng,
) -> Result<ExecutedRun> {
    if steps == 0 {
        return Err(Error::Config("simulation needs at least one step".into()));
    }
    let mut controller = Controller::new(site, params.clone())?;
    controller.billing_end = Some(steps);
    let mut sorted: Vec<&TraceSession> = trace.iter().filter(|s| s.arrival < steps).collect();
    sorted.sort_by_key(|s| (s.arrival, s.id));
    let mut next = 0;
    let mut records = Vec::with_capacity(steps);
    for t in 0..steps {
        let departures: Vec<usize> = controller.log.remove_departed(t).iter().map(|e| e.id).collect();
        let start = next;
        while next < sorted.len() && sorted[next].arrival == t {
            next += 1;
        }
        let arriving: Vec<TraceSession> = sorted[start..next].iter().map(|s| **s).collect();
        let arrivals = decide_arrivals(&mut controller, &arriving, site, rule, rng);
        let (actions, load, source) = controller.step(t, site, predictor)?;
        records.push(StepRecord {
            step: t,
            arrivals,
            departures,
            actions,
            load,
            peak: controller.memory.peak,
            source,
        });
    }
    ExecutedRun::assemble(trace, site, params, steps, records)
}

/// Runs independent replicas, one seed each, in parallel.
pub fn run_replicas<F>(seeds: &[u64], exec: crate::parallel::Execution, run: F) -> Vec<Result<ExecutedRun>>
where
    F: Fn(u64) -> Result<ExecutedRun> + Sync + Send,
{
    crate::parallel::map(exec, seeds, |&s| run(s))
}

/// Offline counterpart of a run: the whole horizon as one operation problem.
#[derive(Debug, Clone)]
pub struct OfflineInstance {
    pub scenario: DemandScenario,
    pub grid: crate::domain::TimeGrid,
    pub station: crate::domain::StationConfig,
    pub tariff: crate::domain::TariffAndCosts,
    pub options: OperationOptions,
}

impl OfflineInstance {
    /// Sessions with their actual departures and targets capped by the
    /// registered stay, on the fine grid over `steps`.
    pub fn new(trace: &[TraceSession], site: &SiteProfile, steps: usize) -> Result<Self> {
        site.validate()?;
        let grid = crate::domain::TimeGrid::uniform(steps, site.fine_dt)?;
        let eta = site.station.efficiency;
        let max_power = site.max_power;
        let sessions = trace
            .iter()
            .filter(|s| s.arrival < steps)
            .map(|s| {
                let registered = s.declared_departure.saturating_sub(s.arrival).max(1) as f64 * site.fine_dt;
                let target = s.energy.min(registered * max_power * eta);
                let mut session = crate::domain::Session::new(s.id, s.arrival, s.actual_departure.min(steps), target, max_power)
                    .with_tolerance(s.tolerance);
                if target < s.energy {
                    session.original = Some(crate::domain::OriginalDemand {
                        init_charge: 0.0,
                        target_charge: s.energy,
                    });
                }
                session
            })
            .collect();
        let mut station = site.station.clone();
        station.base_load = (0..steps).map(|t| site.base_load(t)).collect();
        let mut tariff = site.tariff.clone();
        tariff.tou = (0..steps).map(|t| site.tou(t)).collect();
        Ok(Self {
            scenario: DemandScenario::new("run", 1.0, sessions),
            grid,
            station,
            tariff,
            options: OperationOptions::default(),
        })
    }

    pub fn problem(&self) -> OperationProblem<'_> {
        OperationProblem {
            scenario: &self.scenario,
            grid: &self.grid,
            station: &self.station,
            tariff: &self.tariff,
            options: &self.options,
        }
    }
}
