//! Demand sampling, driver behaviour and the naive forecaster.
//!
//! Every function takes its random source explicitly; nothing here touches
//! global randomness, so a seeded [`ChaCha8Rng`] reproduces runs exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{DemandScenario, Session, TimeGrid, Tolerance};
use crate::error::{Error, Result};

pub type SimRng = ChaCha8Rng;

/// Seeded generator used across the crate.
pub fn seeded(seed: u64) -> SimRng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub const ALL: [DayType; 2] = [DayType::Weekday, DayType::Weekend];

    /// Calendar used by the simulator: days 0–4 of each week are weekdays.
    pub fn of_day(day: usize) -> Self {
        if day % 7 < 5 {
            DayType::Weekday
        } else {
            DayType::Weekend
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }
}

/// A historical session, snapped to the day grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSession {
    pub arrival: usize,
    pub departure: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolDay {
    pub day_type: DayType,
    pub sessions: Vec<PoolSession>,
}

/// Historical sessions grouped by calendar day.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionPool {
    pub days: Vec<PoolDay>,
}

impl SessionPool {
    pub fn sessions(&self, day_type: DayType) -> impl Iterator<Item = &PoolSession> {
        self.days
            .iter()
            .filter(move |d| d.day_type == day_type)
            .flat_map(|d| d.sessions.iter())
    }

    pub fn len(&self) -> usize {
        self.days.iter().map(|d| d.sessions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn daily_counts(&self, day_type: DayType) -> Vec<usize> {
        self.days
            .iter()
            .filter(|d| d.day_type == day_type)
            .map(|d| d.sessions.len())
            .collect()
    }

    /// `(mean, std)` of sessions per day for `day_type`; zeros without days.
    pub fn count_stats(&self, day_type: DayType) -> (f64, f64) {
        let counts = self.daily_counts(day_type);
        if counts.is_empty() {
            return (0.0, 0.0);
        }
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<usize>() as f64 / n;
        let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorParams {
    pub omega_mean: f64,
    pub omega_std: f64,
    pub sigmoid_a: f64,
    pub sigmoid_b: f64,
    /// Standard deviation of actual departure around the declared one, steps.
    pub departure_std_steps: f64,
    /// Shortest stay after perturbation, steps.
    pub min_duration_steps: usize,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self {
            omega_mean: 1.0,
            omega_std: 0.2,
            sigmoid_a: 2.0,
            sigmoid_b: 2.0,
            departure_std_steps: 1.0,
            min_duration_steps: 1,
        }
    }
}

impl BehaviorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigmoid_a > 0.0 && self.sigmoid_b > 0.0) {
            return Err(Error::Config("sigmoid parameters must be positive".into()));
        }
        if !(self.omega_std >= 0.0 && self.departure_std_steps >= 0.0) {
            return Err(Error::Config("behaviour standard deviations must be non-negative".into()));
        }
        if self.min_duration_steps == 0 {
            return Err(Error::Config("minimum stay must be at least one step".into()));
        }
        Ok(())
    }
}

/// Probability that a driver facing `v` vacancies stays: `1 / (1 + a·e^{−b·v})`.
pub fn stay_probability(v: i64, params: &BehaviorParams) -> f64 {
    1.0 / (1.0 + params.sigmoid_a * (-params.sigmoid_b * v as f64).exp())
}

pub fn stay_decision(v: i64, params: &BehaviorParams, rng: &mut SimRng) -> bool {
    rng.random::<f64>() < stay_probability(v, params)
}

/// Draws a waiting tolerance from `N(mean, std²)`, truncated at zero.
pub fn sample_tolerance(params: &BehaviorParams, rng: &mut SimRng) -> Tolerance {
    let omega = if params.omega_std == 0.0 {
        params.omega_mean
    } else {
        Normal::new(params.omega_mean, params.omega_std)
            .expect("validated std")
            .sample(rng)
    };
    Tolerance::new(omega.max(0.0)).expect("non-negative tolerance")
}

/// Actual departure step: the declared step plus Gaussian noise, rounded,
/// kept at least `min_duration_steps` after arrival and at most `limit`.
pub fn perturb_departure(declared: usize, arrival: usize, params: &BehaviorParams, limit: usize, rng: &mut SimRng) -> usize {
    let noisy = if params.departure_std_steps == 0.0 {
        declared as f64
    } else {
        Normal::new(declared as f64, params.departure_std_steps)
            .expect("validated std")
            .sample(rng)
            .round()
    };
    let earliest = arrival + params.min_duration_steps;
    (noisy.max(earliest as f64) as usize).min(limit.max(earliest))
}

fn to_session(id: usize, p: &PoolSession, max_power: f64) -> Session {
    Session::new(id, p.arrival, p.departure, p.energy, max_power)
}

/// Draws `count` sessions of `day_type` with replacement, sorted by arrival
/// and re-indexed, with targets clipped to the stay.
pub fn sample_profile(
    pool: &SessionPool,
    day_type: DayType,
    count: usize,
    max_power: f64,
    grid: &TimeGrid,
    rng: &mut SimRng,
) -> Result<DemandScenario> {
    let candidates: Vec<&PoolSession> = pool.sessions(day_type).collect();
    if count > 0 && candidates.is_empty() {
        return Err(Error::Data(format!("session pool has no {} sessions", day_type.label())));
    }
    let mut drawn: Vec<PoolSession> = (0..count)
        .map(|_| *candidates[rng.random_range(0..candidates.len())])
        .collect();
    drawn.sort_by_key(|p| (p.arrival, p.departure));
    let sessions = drawn.iter().enumerate().map(|(i, p)| to_session(i, p, max_power)).collect();
    Ok(DemandScenario::new(day_type.label(), 1.0, sessions).clipped(grid, 1.0))
}

/// Frozen typical profiles, one per day type, drawn once at the mean daily
/// count. Forecast sessions always carry `ω = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveForecaster {
    pub weekday: Vec<Session>,
    pub weekend: Vec<Session>,
}

impl NaiveForecaster {
    pub fn new(pool: &SessionPool, max_power: f64, grid: &TimeGrid, rng: &mut SimRng) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::Data("cannot build a forecaster from an empty pool".into()));
        }
        let mut draw = |d: DayType| -> Result<Vec<Session>> {
            let count = pool.count_stats(d).0.round() as usize;
            Ok(sample_profile(pool, d, count, max_power, grid, rng)?
                .sessions
                .into_iter()
                .map(|s| s.with_tolerance(Tolerance::default()))
                .collect())
        };
        Ok(Self {
            weekday: draw(DayType::Weekday)?,
            weekend: draw(DayType::Weekend)?,
        })
    }

    /// Sessions of the typical profile for `day_type` arriving at or after
    /// step `t` of the day.
    pub fn remaining(&self, day_type: DayType, t: usize) -> Vec<Session> {
        let profile = match day_type {
            DayType::Weekday => &self.weekday,
            DayType::Weekend => &self.weekend,
        };
        profile.iter().filter(|s| s.arrival >= t).cloned().collect()
    }
}

/// Shape of the synthetic stand-in for the historical session data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticPoolSpec {
    pub weekday_days: usize,
    pub weekend_days: usize,
    pub weekday_mean: f64,
    pub weekend_mean: f64,
    /// Mean session energy, kWh.
    pub mean_energy: f64,
    /// Target average slack ratio of the generated sessions.
    pub slackness: f64,
    pub max_power: f64,
}

impl Default for SyntheticPoolSpec {
    fn default() -> Self {
        Self {
            weekday_days: 20,
            weekend_days: 8,
            weekday_mean: 43.0,
            weekend_mean: 10.0,
            mean_energy: 8.0,
            slackness: 0.5,
            max_power: 6.6,
        }
    }
}

/// Generates a workplace-style pool: weekday arrivals concentrate in the
/// morning, weekend arrivals spread over the day. Stays are stretched from
/// the energy so that the average slack ratio is close to `spec.slackness`.
pub fn synthetic_pool(spec: &SyntheticPoolSpec, grid: &TimeGrid, rng: &mut SimRng) -> SessionPool {
    let steps = grid.step_count();
    let dt = grid.step_length(0);
    let day_hours = steps as f64 * dt;
    let mut days = Vec::new();
    let plan = [
        (DayType::Weekday, spec.weekday_days, spec.weekday_mean),
        (DayType::Weekend, spec.weekend_days, spec.weekend_mean),
    ];
    for (day_type, n_days, mean) in plan {
        for _ in 0..n_days {
            let count = if mean > 0.0 {
                let c = Normal::new(mean, mean.sqrt()).expect("positive std").sample(rng);
                c.round().max(0.0) as usize
            } else {
                0
            };
            let mut sessions = Vec::with_capacity(count);
            for _ in 0..count {
                let arrival_h: f64 = match day_type {
                    DayType::Weekday if rng.random::<f64>() < 0.6 => {
                        Normal::new(8.5, 1.2).unwrap().sample(rng)
                    }
                    DayType::Weekday => rng.random_range(10.0..18.0),
                    DayType::Weekend => rng.random_range(9.0..19.0),
                };
                let energy = Normal::new(spec.mean_energy, spec.mean_energy * 0.4)
                    .unwrap()
                    .sample(rng)
                    .clamp(1.0, 3.0 * spec.mean_energy);
                let energy = (energy * 100.0).round() / 100.0;
                let busy = (1.0 - spec.slackness + rng.random_range(-0.2..0.2)).clamp(0.05, 1.0);
                let stay_h = energy / (spec.max_power * busy);
                let arrival = ((arrival_h.clamp(0.0, day_hours - dt)) / dt).floor() as usize;
                let departure = (arrival + (stay_h / dt).round().max(1.0) as usize).min(steps).max(arrival + 1);
                sessions.push(PoolSession {
                    arrival,
                    departure,
                    energy,
                });
            }
            sessions.sort_by_key(|p| (p.arrival, p.departure));
            days.push(PoolDay { day_type, sessions });
        }
    }
    SessionPool { days }
}

/// One arrival of a simulated demand trace, in absolute steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSession {
    pub id: usize,
    pub arrival: usize,
    pub declared_departure: usize,
    pub actual_departure: usize,
    pub energy: f64,
    pub tolerance: Tolerance,
}

/// Samples `days` consecutive days of demand. Each day draws its session
/// count from the historical daily counts of its day type.
pub fn sample_trace(
    pool: &SessionPool,
    days: usize,
    steps_per_day: usize,
    params: &BehaviorParams,
    rng: &mut SimRng,
) -> Result<Vec<TraceSession>> {
    let mut out = Vec::new();
    let limit = days * steps_per_day;
    for day in 0..days {
        let day_type = DayType::of_day(day);
        let counts = pool.daily_counts(day_type);
        let candidates: Vec<&PoolSession> = pool.sessions(day_type).collect();
        if counts.is_empty() || candidates.is_empty() {
            continue;
        }
        let count = counts[rng.random_range(0..counts.len())];
        let mut drawn: Vec<PoolSession> = (0..count)
            .map(|_| *candidates[rng.random_range(0..candidates.len())])
            .collect();
        drawn.sort_by_key(|p| (p.arrival, p.departure));
        for p in drawn {
            let arrival = day * steps_per_day + p.arrival;
            let declared = day * steps_per_day + p.departure;
            let actual = perturb_departure(declared, arrival, params, limit, rng);
            let tolerance = sample_tolerance(params, rng);
            out.push(TraceSession {
                id: out.len(),
                arrival,
                declared_departure: declared,
                actual_departure: actual,
                energy: p.energy,
                tolerance,
            });
        }
    }
    Ok(out)
}
