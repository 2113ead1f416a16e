use super::*;
use crate::domain::{PenaltyTier, Session};

fn tariff(steps: usize, tou: f64) -> TariffAndCosts {
    TariffAndCosts {
        tou: vec![tou; steps],
        fee: 35.0,
        demand_charge: 18.0,
        billing_days: 30.0,
        switch_cost: 1.0,
        unsat_penalties: vec![
            PenaltyTier { rate: 10.0, threshold: 1.0 },
            PenaltyTier { rate: 20.0, threshold: 0.9 },
        ],
        capital_fc: 5400.0,
        capital_rc: 10800.0,
        lifespan_years: 10.0,
        sr_threshold: 0.9,
        sr_requirement: 0.9,
    }
}

struct Case {
    scenario: DemandScenario,
    grid: TimeGrid,
    station: StationConfig,
    tariff: TariffAndCosts,
    options: OperationOptions,
}

impl Case {
    fn new(steps: usize, m: usize, n: usize, sessions: Vec<Session>) -> Self {
        let grid = TimeGrid::uniform(steps, 0.25).unwrap();
        Self {
            scenario: DemandScenario::new("test", 1.0, sessions).clipped(&grid, 1.0),
            station: StationConfig::new(m, n, steps),
            tariff: tariff(steps, 11.0),
            options: OperationOptions::default(),
            grid,
        }
    }

    fn problem(&self) -> OperationProblem<'_> {
        OperationProblem {
            scenario: &self.scenario,
            grid: &self.grid,
            station: &self.station,
            tariff: &self.tariff,
            options: &self.options,
        }
    }

    fn solve(&self) -> OperationOutcome {
        let out = solve_operation(&self.problem(), &SolveOptions::exact()).unwrap();
        let report = validate_schedule(&out.schedule, &self.problem());
        assert!(report.is_empty(), "{report}");
        let rel = (out.costs.opex - out.objective).abs() / out.objective.abs().max(1.0);
        assert!(rel < 1e-4, "reprice {} vs solver {}", out.costs.opex, out.objective);
        out
    }
}

#[test]
fn single_offpeak_session_is_profitable() {
    let mut case = Case::new(8, 1, 0, vec![Session::new(0, 2, 6, 3.3, 6.6)]);
    case.options.demand_charge_rate = Some(5.0);
    let out = case.solve();
    assert_eq!(out.schedule.assignments, vec![Assignment::Fix]);
    assert!((out.schedule.delivered(0, &case.scenario.sessions[0]) - 3.3).abs() < 1e-6);
    // flat 3.3 kW over four steps: (11 − 35)·3.3 + 5·3.3 + two plug switches
    assert!((out.costs.opex - (-24.0 * 3.3 + 5.0 * 3.3 + 2.0)).abs() < 1e-6);
    assert!(out.costs.opex < 0.0);
}

#[test]
fn empty_scenario_pays_base_load_demand_charge() {
    let mut case = Case::new(4, 2, 1, vec![]);
    case.station.base_load = vec![1.0, 4.0, 2.0, 0.0];
    let out = case.solve();
    let rate = case.tariff.demand_charge_cents(1.0);
    assert!((out.costs.opex - rate * 4.0).abs() < 1e-9);
    assert_eq!(out.schedule.session_count(), 0);
}

#[test]
fn no_chargers_means_everyone_leaves() {
    let case = Case::new(4, 0, 0, vec![Session::new(0, 0, 4, 2.0, 6.6)]);
    let out = case.solve();
    assert_eq!(out.schedule.assignments, vec![Assignment::Leave]);
    assert_eq!(out.costs.disappointment, 0.0);
}

#[test]
fn full_fixed_bank_turns_next_arrival_away() {
    let case = Case::new(6, 1, 0, vec![Session::new(0, 0, 6, 1.0, 6.6), Session::new(1, 2, 5, 1.0, 6.6)]);
    let out = case.solve();
    assert_eq!(out.schedule.assignments, vec![Assignment::Fix, Assignment::Leave]);
    assert_eq!(out.schedule.queues[1].q_fix, 1);
    assert_eq!(out.schedule.queues[1].v_fix, 0);
    assert_eq!(out.schedule.queues[1].v_robo, 0);
}

#[test]
fn robo_charger_shares_between_overlapping_sessions() {
    let sessions = vec![
        Session::new(0, 0, 6, 1.65, 6.6),
        Session::new(1, 1, 6, 1.65, 6.6),
        Session::new(2, 1, 6, 1.65, 6.6),
    ];
    let case = Case::new(6, 1, 1, sessions);
    let out = case.solve();
    for t in 0..6 {
        let plugged = out.schedule.plug.iter().filter(|row| row[t]).count();
        assert!(plugged <= 2, "step {t}: {plugged} plugged");
    }
}

#[test]
fn energy_update_from_nonzero_charge() {
    let s = Session::new(0, 0, 1, 1.65, 6.6).with_init_charge(10.0);
    let case = Case::new(1, 1, 0, vec![s]);
    let out = case.solve();
    assert!((out.schedule.charge[0][1] - 11.65).abs() < 1e-9);
}

#[test]
fn disappointment_tiers() {
    let s = Session::new(0, 0, 8, 10.0, 6.6);
    let case = Case::new(8, 1, 0, vec![s.clone()]);
    let mut schedule = Schedule::all_leave(&case.scenario, &case.grid, 1, 0);
    schedule.assignments[0] = Assignment::Fix;
    schedule.charge[0][8] = 8.0;
    assert!((disappointment_of(&schedule, 0, &s, &case.tariff) - 40.0).abs() < 1e-9);
    schedule.assignments[0] = Assignment::Leave;
    assert_eq!(disappointment_of(&schedule, 0, &s, &case.tariff), 0.0);
}

#[test]
fn reprice_single_step_energy() {
    let mut case = Case::new(1, 1, 0, vec![Session::new(0, 0, 1, 1.65, 6.6)]);
    case.tariff.tou = vec![34.0];
    let mut schedule = Schedule::all_leave(&case.scenario, &case.grid, 1, 0);
    schedule.assignments[0] = Assignment::Fix;
    schedule.plug[0][0] = true;
    schedule.power[0][0] = 6.6;
    schedule.charge[0][1] = 1.65;
    let c = reprice(&schedule, &case.problem());
    assert!((c.tou - c.fee - (-1.65)).abs() < 1e-9);
    let zero = reprice(&Schedule::all_leave(&case.scenario, &case.grid, 1, 0), &case.problem());
    assert_eq!((zero.tou, zero.fee), (0.0, 0.0));
}

#[test]
fn switch_count_from_plug_row() {
    let mut case = Case::new(4, 0, 1, vec![Session::new(0, 0, 4, 1.0, 6.6)]);
    case.tariff.switch_cost = 3.0;
    let mut schedule = Schedule::all_leave(&case.scenario, &case.grid, 0, 1);
    schedule.plug[0] = vec![false, true, true, false];
    finish_schedule(&mut schedule, &case.problem());
    let c = reprice(&schedule, &case.problem());
    assert_eq!(c.switching, 6.0);
}

#[test]
fn validator_flags_robo_overbooking() {
    let sessions = vec![Session::new(0, 0, 4, 1.0, 6.6), Session::new(1, 0, 4, 1.0, 6.6)];
    let case = Case::new(4, 0, 1, sessions);
    let mut out = case.solve();
    for i in 0..2 {
        out.schedule.plug[i][0] = true;
    }
    let report = validate_schedule(&out.schedule, &case.problem());
    assert!(report.has(ViolationKind::Capacity), "{report}");
}

#[test]
fn unclipped_scenario_is_rejected() {
    let grid = TimeGrid::uniform(2, 0.25).unwrap();
    let scenario = DemandScenario::new("raw", 1.0, vec![Session::new(0, 0, 2, 10.0, 6.6)]);
    let station = StationConfig::new(1, 0, 2);
    let tariff = tariff(2, 11.0);
    let options = OperationOptions::default();
    let problem = OperationProblem {
        scenario: &scenario,
        grid: &grid,
        station: &station,
        tariff: &tariff,
        options: &options,
    };
    assert!(matches!(build_operation_model(&problem), Err(Error::Data(_))));
}
