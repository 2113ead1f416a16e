//! Shared value types: time grid, charging sessions, demand scenarios,
//! station and tariff parameters, and the solved schedule.
//!
//! Units used throughout the crate: energy in kWh, power in kW, time in
//! hours, money in US cents (reports convert to dollars).

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::DomainError;

/// Discretisation of the optimisation horizon. Step `t` covers
/// `[start(t), start(t) + step_lengths[t])` hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    step_lengths: Vec<f64>,
}

impl TimeGrid {
    /// `steps` slots of `dt` hours each.
    pub fn uniform(steps: usize, dt: f64) -> Result<Self, DomainError> {
        Self::from_lengths(vec![dt; steps])
    }

    pub fn from_lengths(step_lengths: Vec<f64>) -> Result<Self, DomainError> {
        if step_lengths.is_empty() {
            return Err(DomainError::EmptyGrid);
        }
        if let Some((t, &len)) = step_lengths
            .iter()
            .enumerate()
            .find(|(_, l)| !(**l > 0.0 && l.is_finite()))
        {
            return Err(DomainError::NonPositiveStep { step: t, length: len });
        }
        Ok(Self { step_lengths })
    }

    /// The default day grid: 96 quarter-hour steps.
    pub fn quarter_hour_day() -> Self {
        Self::uniform(96, 0.25).expect("static grid is valid")
    }

    pub fn step_count(&self) -> usize {
        self.step_lengths.len()
    }

    pub fn step_length(&self, t: usize) -> f64 {
        self.step_lengths[t]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.step_lengths
    }

    /// Hours elapsed from the start of the horizon to the start of step `t`
    /// (`t == step_count()` gives the horizon length).
    pub fn start_hours(&self, t: usize) -> f64 {
        self.step_lengths[..t].iter().sum()
    }

    /// Total duration in hours of the steps in `[from, to)`.
    pub fn window_hours(&self, from: usize, to: usize) -> f64 {
        let to = to.min(self.step_count());
        if from >= to {
            return 0.0;
        }
        self.step_lengths[from..to].iter().sum()
    }

    pub fn horizon_hours(&self) -> f64 {
        self.step_lengths.iter().sum()
    }

    pub fn is_uniform(&self) -> bool {
        self.step_lengths.windows(2).all(|w| w[0] == w[1])
    }
}

/// Charger class a PEV is (or is to be) attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargerType {
    Fix,
    Robo,
}

impl fmt::Display for ChargerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChargerType::Fix => f.write_str("fix"),
            ChargerType::Robo => f.write_str("robo"),
        }
    }
}

/// Waiting-tolerance factor ω. May be infinite ("always waits").
///
/// Serialised as a JSON number, or the string `"inf"` for the infinite case.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tolerance(f64);

impl Tolerance {
    pub const INFINITE: Tolerance = Tolerance(f64::INFINITY);

    pub fn new(omega: f64) -> Result<Self, DomainError> {
        if omega.is_nan() || omega < 0.0 {
            return Err(DomainError::InvalidTolerance(omega));
        }
        Ok(Self(omega))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// RC queue capacity `⌊(1+ω)·n⌋` for `n` robo-chargers. The infinite
    /// case maps to `unbounded_cap` when `n ≥ 1` and to zero otherwise.
    pub fn queue_capacity(self, rc_count: usize, unbounded_cap: usize) -> usize {
        if rc_count == 0 {
            return 0;
        }
        if self.is_infinite() {
            return unbounded_cap;
        }
        // A small epsilon guards values such as (1 + 0.1) * 10 = 10.999999.
        ((1.0 + self.0) * rc_count as f64 + 1e-9).floor() as usize
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance(1.0)
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Tolerance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Tolerance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let omega = match Raw::deserialize(d)? {
            Raw::Num(v) => v,
            Raw::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => f64::INFINITY,
                other => other.parse::<f64>().map_err(serde::de::Error::custom)?,
            },
        };
        Tolerance::new(omega).map_err(serde::de::Error::custom)
    }
}

/// Demand as originally requested, kept when a session's target has been
/// clipped so that unsatisfied-charge penalties still refer to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginalDemand {
    pub init_charge: f64,
    pub target_charge: f64,
}

/// One charging request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: usize,
    /// First step the PEV is on site.
    pub arrival: usize,
    /// Declared departure step (exclusive).
    pub departure: usize,
    pub demand: f64,
    pub init_charge: f64,
    pub target_charge: f64,
    pub max_power: f64,
    #[serde(default)]
    pub tolerance: Tolerance,
    /// Charger type fixed before the horizon starts (only for `arrival == 0`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preassigned: Option<ChargerType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original: Option<OriginalDemand>,
}

impl Session {
    /// Session with `init_charge = 0` and `target_charge = demand`.
    pub fn new(id: usize, arrival: usize, departure: usize, demand: f64, max_power: f64) -> Self {
        Self {
            id,
            arrival,
            departure,
            demand,
            init_charge: 0.0,
            target_charge: demand,
            max_power,
            tolerance: Tolerance::default(),
            preassigned: None,
            original: None,
        }
    }

    pub fn with_tolerance(mut self, tolerance: Tolerance) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_init_charge(mut self, init_charge: f64) -> Self {
        self.init_charge = init_charge;
        self.target_charge = init_charge + self.demand;
        self
    }

    /// `𝕀_{i,t}`: whether the PEV is on site during step `t`.
    pub fn is_present(&self, t: usize) -> bool {
        self.arrival <= t && t < self.departure
    }

    pub fn duration_steps(&self) -> usize {
        self.departure.saturating_sub(self.arrival)
    }

    /// `(init, demand)` the disappointment penalty is measured against.
    pub fn penalty_basis(&self) -> (f64, f64) {
        match self.original {
            Some(o) => (o.init_charge, o.target_charge - o.init_charge),
            None => (self.init_charge, self.demand),
        }
    }

    /// Most energy the PEV can absorb while on site.
    pub fn window_capacity(&self, grid: &TimeGrid, efficiency: f64) -> f64 {
        grid.window_hours(self.arrival, self.departure) * self.max_power * efficiency
    }

    pub fn validate(&self, horizon: usize) -> Result<(), DomainError> {
        let err = |reason: &str| DomainError::InvalidSession {
            id: self.id,
            reason: reason.to_string(),
        };
        if self.arrival >= self.departure {
            return Err(err("arrival must precede departure"));
        }
        if self.departure > horizon {
            return Err(err("departure beyond horizon"));
        }
        if !(self.demand >= 0.0) || !self.demand.is_finite() {
            return Err(err("demand must be finite and non-negative"));
        }
        if !(self.max_power > 0.0) || !self.max_power.is_finite() {
            return Err(err("max power must be positive"));
        }
        if ((self.init_charge + self.demand) - self.target_charge).abs() > 1e-9 {
            return Err(err("target must equal init + demand"));
        }
        if self.preassigned.is_some() && self.arrival != 0 {
            return Err(err("preassigned sessions must arrive at step 0"));
        }
        Ok(())
    }

    /// Queue order: arrival step, ties broken by id.
    pub fn queue_order(&self, other: &Session) -> Ordering {
        (self.arrival, self.id).cmp(&(other.arrival, other.id))
    }
}

/// `𝕀_{i,t}` as a free function.
pub fn presence_indicator(session: &Session, t: usize) -> bool {
    session.is_present(t)
}

/// Lower the target so it is reachable at full power during the stay.
///
/// The unclipped demand is kept in [`Session::original`] for penalty
/// accounting. Idempotent.
pub fn clip_target(session: &Session, grid: &TimeGrid, efficiency: f64) -> Session {
    let reachable = session.init_charge + session.window_capacity(grid, efficiency);
    if session.target_charge <= reachable {
        return session.clone();
    }
    log::debug!(
        "session {}: target {:.3} kWh clipped to {:.3} kWh",
        session.id,
        session.target_charge,
        reachable
    );
    let mut clipped = session.clone();
    clipped.original.get_or_insert(OriginalDemand {
        init_charge: session.init_charge,
        target_charge: session.target_charge,
    });
    clipped.target_charge = reachable;
    clipped.demand = reachable - session.init_charge;
    clipped
}

/// Ordered session list plus its scenario weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandScenario {
    pub label: String,
    pub probability: f64,
    pub sessions: Vec<Session>,
}

impl DemandScenario {
    /// Builds a scenario, sorting sessions into queue order.
    pub fn new(label: impl Into<String>, probability: f64, mut sessions: Vec<Session>) -> Self {
        sessions.sort_by(|a, b| a.queue_order(b));
        Self {
            label: label.into(),
            probability,
            sessions,
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn validate(&self, horizon: usize) -> Result<(), DomainError> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(DomainError::InvalidProbability(self.probability));
        }
        for s in &self.sessions {
            s.validate(horizon)?;
        }
        if self
            .sessions
            .windows(2)
            .any(|w| w[0].queue_order(&w[1]) != Ordering::Less)
        {
            return Err(DomainError::UnsortedScenario);
        }
        Ok(())
    }

    pub fn clipped(&self, grid: &TimeGrid, efficiency: f64) -> Self {
        Self {
            label: self.label.clone(),
            probability: self.probability,
            sessions: self
                .sessions
                .iter()
                .map(|s| clip_target(s, grid, efficiency))
                .collect(),
        }
    }

    /// True if every target is reachable within its stay.
    pub fn is_clipped(&self, grid: &TimeGrid, efficiency: f64) -> bool {
        self.sessions.iter().all(|s| {
            s.target_charge <= s.init_charge + s.window_capacity(grid, efficiency) + 1e-9
        })
    }
}

/// Checks that a set of scenario weights sums to one.
pub fn validate_weights(scenarios: &[DemandScenario]) -> Result<(), DomainError> {
    let total: f64 = scenarios.iter().map(|s| s.probability).sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(DomainError::WeightsDoNotSumToOne(total));
    }
    Ok(())
}

/// Charger counts and site parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub fc_count: usize,
    pub rc_count: usize,
    /// Non-charging site load per step, kW.
    pub base_load: Vec<f64>,
    pub efficiency: f64,
}

impl StationConfig {
    pub fn new(fc_count: usize, rc_count: usize, steps: usize) -> Self {
        Self {
            fc_count,
            rc_count,
            base_load: vec![0.0; steps],
            efficiency: 1.0,
        }
    }

    pub fn with_counts(&self, fc_count: usize, rc_count: usize) -> Self {
        Self {
            fc_count,
            rc_count,
            ..self.clone()
        }
    }

    pub fn validate(&self, horizon: usize) -> Result<(), DomainError> {
        if self.base_load.len() != horizon {
            return Err(DomainError::LengthMismatch {
                what: "base_load",
                expected: horizon,
                found: self.base_load.len(),
            });
        }
        if self.base_load.iter().any(|p| !(*p >= 0.0)) {
            return Err(DomainError::NegativeValue("base_load"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(DomainError::InvalidEfficiency(self.efficiency));
        }
        Ok(())
    }
}

/// One piece of the unsatisfied-charge penalty: `rate` ¢/kWh applied to the
/// shortfall below `threshold · demand`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTier {
    pub rate: f64,
    pub threshold: f64,
}

/// Prices and capital costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffAndCosts {
    /// Grid energy price per step, ¢/kWh.
    pub tou: Vec<f64>,
    /// Charging fee collected from drivers, ¢/kWh.
    pub fee: f64,
    /// Demand charge, $/kW per billing cycle.
    pub demand_charge: f64,
    pub billing_days: f64,
    /// Cost per plug-in or plug-out, ¢.
    pub switch_cost: f64,
    pub unsat_penalties: Vec<PenaltyTier>,
    /// Capital cost of one fixed charger, $.
    pub capital_fc: f64,
    /// Capital cost of one robo-charger, $.
    pub capital_rc: f64,
    pub lifespan_years: f64,
    pub sr_threshold: f64,
    pub sr_requirement: f64,
}

impl TariffAndCosts {
    /// Demand-charge coefficient in ¢/kW for a model spanning `hours`.
    pub fn demand_charge_cents(&self, hours: f64) -> f64 {
        self.demand_charge * 100.0 * (hours / 24.0) / self.billing_days
    }

    /// Amortised capital cost of a station, ¢/day.
    pub fn capex_cents_per_day(&self, fc_count: usize, rc_count: usize) -> f64 {
        let capital = self.capital_fc * fc_count as f64 + self.capital_rc * rc_count as f64;
        capital * 100.0 / (self.lifespan_years * 365.0)
    }

    pub fn peak_price(&self) -> f64 {
        self.tou.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn validate(&self, horizon: usize) -> Result<(), DomainError> {
        if self.tou.len() != horizon {
            return Err(DomainError::LengthMismatch {
                what: "tou",
                expected: horizon,
                found: self.tou.len(),
            });
        }
        let non_negative = [
            ("tou", self.tou.iter().all(|v| *v >= 0.0)),
            ("fee", self.fee >= 0.0),
            ("demand_charge", self.demand_charge >= 0.0),
            ("switch_cost", self.switch_cost >= 0.0),
            ("unsat_penalties", self.unsat_penalties.iter().all(|p| p.rate >= 0.0)),
            ("capital_fc", self.capital_fc >= 0.0),
            ("capital_rc", self.capital_rc >= 0.0),
        ];
        if let Some((name, _)) = non_negative.iter().find(|(_, ok)| !ok) {
            return Err(DomainError::NegativeValue(name));
        }
        if !(self.billing_days > 0.0) || !(self.lifespan_years > 0.0) {
            return Err(DomainError::NegativeValue("billing_days/lifespan_years"));
        }
        for tier in &self.unsat_penalties {
            if !(tier.threshold > 0.0 && tier.threshold <= 1.0) {
                return Err(DomainError::InvalidThreshold(tier.threshold));
            }
        }
        if !(self.sr_threshold > 0.0 && self.sr_threshold <= 1.0) {
            return Err(DomainError::InvalidThreshold(self.sr_threshold));
        }
        if !(0.0..=1.0).contains(&self.sr_requirement) {
            return Err(DomainError::InvalidThreshold(self.sr_requirement));
        }
        Ok(())
    }
}

/// Per-session outcome of the leave-or-wait decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    Fix,
    Robo,
    Leave,
}

impl Assignment {
    pub fn charger(self) -> Option<ChargerType> {
        match self {
            Assignment::Fix => Some(ChargerType::Fix),
            Assignment::Robo => Some(ChargerType::Robo),
            Assignment::Leave => None,
        }
    }
}

impl From<ChargerType> for Assignment {
    fn from(c: ChargerType) -> Self {
        match c {
            ChargerType::Fix => Assignment::Fix,
            ChargerType::Robo => Assignment::Robo,
        }
    }
}

/// Queue lengths and vacancies seen by a session at its arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueueState {
    pub q_fix: usize,
    pub q_robo: usize,
    pub v_fix: usize,
    pub v_robo: usize,
}

/// Money totals in cents. `opex = tou − fee + demand + switching + disappointment`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub tou: f64,
    pub fee: f64,
    pub demand: f64,
    pub switching: f64,
    pub disappointment: f64,
    pub opex: f64,
    pub capex: f64,
    pub tco: f64,
}

impl CostBreakdown {
    pub fn new(tou: f64, fee: f64, demand: f64, switching: f64, disappointment: f64, capex: f64) -> Self {
        let opex = tou - fee + demand + switching + disappointment;
        Self {
            tou,
            fee,
            demand,
            switching,
            disappointment,
            opex,
            capex,
            tco: opex + capex,
        }
    }

    pub fn with_capex(self, capex: f64) -> Self {
        Self::new(self.tou, self.fee, self.demand, self.switching, self.disappointment, capex)
    }

    /// Probability-weighted combination of breakdowns.
    pub fn weighted(parts: &[(f64, CostBreakdown)]) -> Self {
        let mut acc = [0.0; 6];
        for (w, c) in parts {
            for (a, v) in acc
                .iter_mut()
                .zip([c.tou, c.fee, c.demand, c.switching, c.disappointment, c.capex])
            {
                *a += w * v;
            }
        }
        Self::new(acc[0], acc[1], acc[2], acc[3], acc[4], acc[5])
    }

    pub fn in_dollars(&self) -> Self {
        Self::new(
            self.tou / 100.0,
            self.fee / 100.0,
            self.demand / 100.0,
            self.switching / 100.0,
            self.disappointment / 100.0,
            self.capex / 100.0,
        )
    }
}

/// Full operation plan for one scenario. Matrices are indexed
/// `[session][step]`, sessions in scenario order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub grid: TimeGrid,
    pub fc_count: usize,
    pub rc_count: usize,
    pub assignments: Vec<Assignment>,
    pub plug: Vec<Vec<bool>>,
    pub power: Vec<Vec<f64>>,
    pub curtailed: Vec<Vec<f64>>,
    /// Charge at the start of each step, `T + 1` columns.
    pub charge: Vec<Vec<f64>>,
    pub virtual_charge: Vec<Vec<f64>>,
    pub queues: Vec<QueueState>,
    pub peak_power: f64,
    /// `switches[i][t]` marks a plug change between steps `t` and `t + 1`.
    pub switches: Vec<Vec<bool>>,
    pub disappointment: Vec<f64>,
}

impl Schedule {
    /// Schedule where every session leaves immediately.
    pub fn all_leave(scenario: &DemandScenario, grid: &TimeGrid, fc_count: usize, rc_count: usize) -> Self {
        let steps = grid.step_count();
        let n = scenario.len();
        let charge: Vec<Vec<f64>> = scenario
            .sessions
            .iter()
            .map(|s| vec![s.init_charge; steps + 1])
            .collect();
        Self {
            grid: grid.clone(),
            fc_count,
            rc_count,
            assignments: vec![Assignment::Leave; n],
            plug: vec![vec![false; steps]; n],
            power: vec![vec![0.0; steps]; n],
            curtailed: vec![vec![0.0; steps]; n],
            virtual_charge: charge.clone(),
            charge,
            queues: vec![QueueState::default(); n],
            peak_power: 0.0,
            switches: vec![vec![false; steps.saturating_sub(1)]; n],
            disappointment: vec![0.0; n],
        }
    }

    pub fn session_count(&self) -> usize {
        self.assignments.len()
    }

    /// Energy delivered to session `i` (charge at departure minus initial).
    pub fn delivered(&self, i: usize, session: &Session) -> f64 {
        self.charge[i][session.departure] - session.init_charge
    }

    /// Aggregate charging power per step, excluding base load.
    pub fn aggregate_power(&self) -> Vec<f64> {
        let steps = self.grid.step_count();
        (0..steps)
            .map(|t| self.power.iter().map(|row| row[t]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn session(arrival: usize, departure: usize) -> Session {
        Session::new(0, arrival, departure, 5.0, 6.6)
    }

    #[test]
    fn presence_boundaries() {
        let s = session(4, 8);
        assert!(presence_indicator(&s, 4));
        assert!(!presence_indicator(&s, 8));
        assert!(presence_indicator(&s, 6));
        assert!(!presence_indicator(&s, 3));
    }

    #[test]
    fn clip_to_window_capacity() {
        let grid = TimeGrid::uniform(4, 0.25).unwrap();
        let s = Session::new(0, 0, 2, 10.0, 6.6);
        let c = clip_target(&s, &grid, 1.0);
        assert!((c.target_charge - 3.3).abs() < 1e-12);
        assert!((c.demand - 3.3).abs() < 1e-12);
        assert_eq!(
            c.original,
            Some(OriginalDemand {
                init_charge: 0.0,
                target_charge: 10.0
            })
        );
        assert_eq!(c.penalty_basis(), (0.0, 10.0));
    }

    #[test]
    fn clip_leaves_feasible_targets_alone() {
        let grid = TimeGrid::uniform(4, 0.25).unwrap();
        let s = Session::new(0, 0, 2, 3.0, 6.6);
        assert_eq!(clip_target(&s, &grid, 1.0), s);

        let z = Session::new(1, 0, 2, 0.0, 6.6).with_init_charge(5.0);
        let c = clip_target(&z, &grid, 1.0);
        assert_eq!(c, z);
        assert_eq!(c.demand, 0.0);
        assert_eq!(c.target_charge, 5.0);
    }

    #[test]
    fn session_validation() {
        let mut s = session(3, 3);
        assert!(s.validate(96).is_err());
        s.departure = 97;
        assert!(s.validate(96).is_err());
        s.departure = 10;
        assert!(s.validate(96).is_ok());
        s.preassigned = Some(ChargerType::Fix);
        assert!(s.validate(96).is_err());
    }

    #[test]
    fn tolerance_queue_capacity() {
        assert_eq!(Tolerance::new(1.0).unwrap().queue_capacity(4, 99), 8);
        assert_eq!(Tolerance::new(0.5).unwrap().queue_capacity(3, 99), 4);
        assert_eq!(Tolerance::new(0.1).unwrap().queue_capacity(10, 99), 11);
        assert_eq!(Tolerance::INFINITE.queue_capacity(2, 7), 7);
        assert_eq!(Tolerance::INFINITE.queue_capacity(0, 7), 0);
        assert!(Tolerance::new(-0.1).is_err());
    }

    #[test]
    fn tolerance_serde() {
        let s: Tolerance = serde_json::from_str("\"inf\"").unwrap();
        assert!(s.is_infinite());
        assert_eq!(serde_json::to_string(&s).unwrap(), "\"inf\"");
        let f: Tolerance = serde_json::from_str("1.5").unwrap();
        assert_eq!(f.value(), 1.5);
    }

    #[test]
    fn cost_breakdown_sums() {
        let c = CostBreakdown::new(10.0, 30.0, 5.0, 1.0, 2.0, 7.0);
        assert_eq!(c.opex, 10.0 - 30.0 + 5.0 + 1.0 + 2.0);
        assert_eq!(c.tco, c.opex + 7.0);
    }

    #[test]
    fn scenario_sorts_by_arrival_then_id() {
        let sc = DemandScenario::new(
            "x",
            1.0,
            vec![
                Session::new(2, 5, 9, 1.0, 6.6),
                Session::new(1, 5, 9, 1.0, 6.6),
                Session::new(0, 7, 9, 1.0, 6.6),
            ],
        );
        let ids: Vec<_> = sc.sessions.iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![1, 2, 0]);
        assert!(sc.validate(96).is_ok());
    }

    proptest! {
        #[test]
        fn presence_covers_exact_duration(a in 0usize..90, len in 1usize..6) {
            let s = session(a, a + len);
            let count = (0..96).filter(|&t| presence_indicator(&s, t)).count();
            prop_assert_eq!(count, len);
        }

        #[test]
        fn clip_is_idempotent(a in 0usize..10, len in 1usize..10, demand in 0.0f64..40.0,
                              init in 0.0f64..20.0, eta in 0.5f64..=1.0) {
            let grid = TimeGrid::uniform(24, 0.25).unwrap();
            let s = Session::new(0, a, a + len, demand, 6.6).with_init_charge(init);
            let once = clip_target(&s, &grid, eta);
            let twice = clip_target(&once, &grid, eta);
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.target_charge <= s.target_charge);
        }

        #[test]
        fn ordering_survives_serde(arrivals in proptest::collection::vec(0usize..20, 0..12)) {
            let sessions: Vec<_> = arrivals.iter().enumerate()
                .map(|(i, &a)| Session::new(i, a, a + 3, 2.0, 6.6)).collect();
            let sc = DemandScenario::new("p", 1.0, sessions);
            let json = serde_json::to_string(&sc).unwrap();
            let back: DemandScenario = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, &sc);
            prop_assert!(back.validate(30).is_ok());
        }
    }
}
