//! Full parameter set, read from TOML. Every key is optional; missing keys
//! fall back to the base planning case and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{DemandScenario, PenaltyTier, StationConfig, TariffAndCosts, TimeGrid, Tolerance};
use crate::error::{Error, Result};
use crate::milp::SolveOptions;
use crate::mpc::{MpcParams, SiteProfile};
use crate::operation::OperationOptions;
use crate::planning::{PeakAggregation, PlanningProblem};
use crate::stochastic::{sample_profile, synthetic_pool, BehaviorParams, DayType, SessionPool, SimRng, SyntheticPoolSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub grid: GridSection,
    pub station: StationSection,
    pub tariff: TariffSection,
    pub demand: DemandSection,
    pub planning: PlanningSection,
    pub behavior: BehaviorParams,
    pub solver: SolverSection,
    pub mpc: MpcParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridSection::default(),
            station: StationSection::default(),
            tariff: TariffSection::default(),
            demand: DemandSection::default(),
            planning: PlanningSection::default(),
            behavior: BehaviorParams::default(),
            solver: SolverSection::default(),
            mpc: MpcParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub steps: usize,
    pub step_hours: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            steps: 96,
            step_hours: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationSection {
    /// Charger counts used by `operate` and `mpc-sim`.
    pub fc_count: usize,
    pub rc_count: usize,
    /// Per-PEV power limit, kW.
    pub max_power: f64,
    pub efficiency: f64,
    /// Site load per step, kW: empty for none, one value for a constant, or
    /// one value per step.
    pub base_load: Vec<f64>,
}

impl Default for StationSection {
    fn default() -> Self {
        Self {
            fc_count: 3,
            rc_count: 4,
            max_power: 6.6,
            efficiency: 1.0,
            base_load: Vec::new(),
        }
    }
}

/// A named TOU price applying over `[start, end)` hour ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TouBand {
    pub name: String,
    /// ¢/kWh.
    pub price: f64,
    pub hours: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TariffSection {
    /// Charging fee, ¢/kWh.
    pub fee: f64,
    pub bands: Vec<TouBand>,
    /// $/kW per billing cycle.
    pub demand_charge: f64,
    pub billing_days: f64,
    /// ¢ per plug or unplug.
    pub switch_cost: f64,
    pub unsat_penalties: Vec<PenaltyTier>,
    /// $ per charger.
    pub capital_fc: f64,
    pub capital_rc: f64,
    pub lifespan_years: f64,
    pub sr_threshold: f64,
    pub sr_requirement: f64,
}

impl Default for TariffSection {
    fn default() -> Self {
        let band = |name: &str, price: f64, hours: &[[f64; 2]]| TouBand {
            name: name.into(),
            price,
            hours: hours.to_vec(),
        };
        Self {
            fee: 35.0,
            bands: vec![
                band("super_off_peak", 11.0, &[[0.0, 9.0]]),
                band("off_peak", 13.0, &[[9.0, 16.0], [21.0, 24.0]]),
                band("peak", 34.0, &[[16.0, 21.0]]),
            ],
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandSection {
    /// Weekday and weekend scenario weights.
    pub probabilities: [f64; 2],
    /// Sessions drawn for the weekday and weekend scenarios.
    pub sessions: [usize; 2],
    /// Waiting tolerance applied to every planning session.
    pub tolerance: Tolerance,
    /// Session pool written by `ingest`; a synthetic pool is generated when
    /// absent.
    pub pool: Option<PathBuf>,
    pub synthetic: SyntheticPoolSpec,
}

impl Default for DemandSection {
    fn default() -> Self {
        Self {
            probabilities: [5.0 / 7.0, 2.0 / 7.0],
            sessions: [43, 10],
            tolerance: Tolerance::default(),
            pool: None,
            synthetic: SyntheticPoolSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanningSection {
    pub m_max: usize,
    pub n_max: usize,
    /// Satisfied-rate requirement; on by default exactly when drivers never
    /// leave (`tolerance = "inf"`).
    pub enforce_sr: Option<bool>,
    pub peak: PeakAggregation,
}

impl Default for PlanningSection {
    fn default() -> Self {
        Self {
            m_max: 10,
            n_max: 10,
            enforce_sr: None,
            peak: PeakAggregation::Weighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mip_gap: f64,
    /// Seconds per solve.
    pub time_limit: f64,
    pub threads: Option<u32>,
    pub seed: i32,
    pub verbose: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            mip_gap: 0.01,
            time_limit: 120.0,
            threads: None,
            seed: 0,
            verbose: false,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(pool) = &cfg.demand.pool {
            if pool.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.demand.pool = Some(dir.join(pool));
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.steps == 0 || !(g.step_hours > 0.0) || !g.step_hours.is_finite() {
            return Err(Error::Config("grid needs positive steps and step length".into()));
        }
        let s = &self.station;
        if !(s.max_power > 0.0) || !s.max_power.is_finite() {
            return Err(Error::Config("station.max_power must be positive".into()));
        }
        if !(s.base_load.len() <= 1 || s.base_load.len() == g.steps) {
            return Err(Error::Config(format!(
                "station.base_load has {} values; expected 0, 1 or {}",
                s.base_load.len(),
                g.steps
            )));
        }
        let t = &self.tariff;
        if t.bands.iter().any(|b| !(b.price >= 0.0)) {
            return Err(Error::Config("TOU prices must be non-negative".into()));
        }
        for b in &t.bands {
            for [from, to] in &b.hours {
                if !(0.0 <= *from && from < to && *to <= 24.0) {
                    return Err(Error::Config(format!("band `{}` has an invalid hour range {from}..{to}", b.name)));
                }
            }
        }
        let as_config = |e: Error| Error::Config(e.to_string());
        self.tariff().map_err(as_config)?;
        self.station(s.fc_count, s.rc_count).map_err(as_config)?;
        let p = &self.demand.probabilities;
        if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("demand.probabilities must be non-negative and sum to 1".into()));
        }
        self.behavior.validate().map_err(as_config)?;
        if !(self.solver.mip_gap >= 0.0) || !(self.solver.time_limit > 0.0) {
            return Err(Error::Config("solver.mip_gap must be ≥ 0 and solver.time_limit > 0".into()));
        }
        if !(self.mpc.billing_cycle_days > 0.0) || !(self.mpc.step_budget > 0.0) {
            return Err(Error::Config("mpc.billing_cycle_days and mpc.step_budget must be positive".into()));
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::uniform(self.grid.steps, self.grid.step_hours)?)
    }

    /// TOU price of every step of the day. Each step takes the band covering
    /// its start time; later bands win where ranges overlap.
    pub fn tou(&self) -> Result<Vec<f64>> {
        let dt = self.grid.step_hours;
        (0..self.grid.steps)
            .map(|t| {
                let hour = (t as f64 * dt) % 24.0 + 1e-9;
                self.tariff
                    .bands
                    .iter()
                    .rev()
                    .find(|b| b.hours.iter().any(|[from, to]| *from <= hour && hour < *to))
                    .map(|b| b.price)
                    .ok_or_else(|| Error::Config(format!("no TOU band covers hour {:.2}", hour - 1e-9)))
            })
            .collect()
    }

    pub fn tariff(&self) -> Result<TariffAndCosts> {
        let t = &self.tariff;
        let tariff = TariffAndCosts {
            tou: self.tou()?,
            fee: t.fee,
            demand_charge: t.demand_charge,
            billing_days: t.billing_days,
            switch_cost: t.switch_cost,
            unsat_penalties: t.unsat_penalties.clone(),
            capital_fc: t.capital_fc,
            capital_rc: t.capital_rc,
            lifespan_years: t.lifespan_years,
            sr_threshold: t.sr_threshold,
            sr_requirement: t.sr_requirement,
        };
        tariff.validate(self.grid.steps)?;
        Ok(tariff)
    }

    pub fn station(&self, fc_count: usize, rc_count: usize) -> Result<StationConfig> {
        let steps = self.grid.steps;
        let base_load = match self.station.base_load.as_slice() {
            [] => vec![0.0; steps],
            [v] => vec![*v; steps],
            all => all.to_vec(),
        };
        let station = StationConfig {
            fc_count,
            rc_count,
            base_load,
            efficiency: self.station.efficiency,
        };
        station.validate(steps)?;
        Ok(station)
    }

    pub fn enforce_sr(&self) -> bool {
        self.planning
            .enforce_sr
            .unwrap_or_else(|| self.demand.tolerance.is_infinite())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            mip_gap: self.solver.mip_gap,
            time_limit: self.solver.time_limit,
            seed: self.solver.seed,
            threads: self.solver.threads,
            heuristic_effort: None,
            verbose: self.solver.verbose,
        }
    }

    pub fn operation_options(&self) -> OperationOptions {
        OperationOptions {
            tolerance: Some(self.demand.tolerance),
            ..OperationOptions::default()
        }
    }

    /// Session pool from `demand.pool`, or a synthetic one.
    pub fn session_pool(&self, rng: &mut SimRng) -> Result<SessionPool> {
        match &self.demand.pool {
            Some(path) => crate::io::read_pool(path),
            None => Ok(synthetic_pool(&self.demand.synthetic, &self.time_grid()?, rng)),
        }
    }

    /// Weekday and weekend scenarios drawn from `pool` at the configured
    /// counts and weights.
    pub fn scenarios(&self, pool: &SessionPool, rng: &mut SimRng) -> Result<Vec<DemandScenario>> {
        let grid = self.time_grid()?;
        DayType::ALL
            .iter()
            .zip(self.demand.sessions.iter().zip(self.demand.probabilities))
            .map(|(&d, (&count, p))| {
                let mut s = sample_profile(pool, d, count, self.station.max_power, &grid, rng)?;
                s.probability = p;
                for session in &mut s.sessions {
                    session.tolerance = self.demand.tolerance;
                }
                Ok(s)
            })
            .collect()
    }

    pub fn planning_problem(&self, scenarios: Vec<DemandScenario>) -> Result<PlanningProblem> {
        let problem = PlanningProblem {
            scenarios,
            grid: self.time_grid()?,
            station: self.station(0, 0)?,
            tariff: self.tariff()?,
            m_max: self.planning.m_max,
            n_max: self.planning.n_max,
            options: self.operation_options(),
            enforce_sr: self.enforce_sr(),
            peak: self.planning.peak,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn site_profile(&self, fc_count: usize, rc_count: usize) -> Result<SiteProfile> {
        let steps_per_day = (24.0 / self.grid.step_hours).round() as usize;
        if steps_per_day != self.grid.steps {
            return Err(Error::Config("rolling simulation needs a grid covering exactly one day".into()));
        }
        let site = SiteProfile {
            fine_dt: self.grid.step_hours,
            steps_per_day,
            max_power: self.station.max_power,
            station: self.station(fc_count, rc_count)?,
            tariff: self.tariff()?,
        };
        site.validate()?;
        Ok(site)
    }
}
