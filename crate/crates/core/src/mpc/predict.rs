use serde::{Deserialize, Serialize};

use crate::domain::Tolerance;
use crate::stochastic::{DayType, NaiveForecaster, TraceSession};

/// A session the controller expects, in absolute fine steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastSession {
    pub arrival: usize,
    pub departure: usize,
    pub energy: f64,
    pub max_power: f64,
    pub tolerance: Tolerance,
}

pub trait Predictor {
    /// Sessions expected to arrive after step `t`.
    fn forecast(&self, t: usize) -> Vec<ForecastSession>;
}

/// Plans with onsite PEVs only.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForecast;

impl Predictor for NoForecast {
    fn forecast(&self, _t: usize) -> Vec<ForecastSession> {
        Vec::new()
    }
}

/// Knows the realised future: arrivals, actual departures and tolerances.
#[derive(Debug, Clone)]
pub struct CompleteInformation {
    sessions: Vec<ForecastSession>,
}

impl CompleteInformation {
    pub fn new(trace: &[TraceSession], max_power: f64) -> Self {
        Self {
            sessions: trace
                .iter()
                .map(|s| ForecastSession {
                    arrival: s.arrival,
                    departure: s.actual_departure,
                    energy: s.energy,
                    max_power,
                    tolerance: s.tolerance,
                })
                .collect(),
        }
    }
}

impl Predictor for CompleteInformation {
    fn forecast(&self, t: usize) -> Vec<ForecastSession> {
        self.sessions.iter().filter(|s| s.arrival > t).copied().collect()
    }
}

/// Rest of the current day's typical profile.
#[derive(Debug, Clone)]
pub struct NaivePredictor {
    pub forecaster: NaiveForecaster,
    pub steps_per_day: usize,
}

impl Predictor for NaivePredictor {
    fn forecast(&self, t: usize) -> Vec<ForecastSession> {
        let day = t / self.steps_per_day;
        let offset = day * self.steps_per_day;
        self.forecaster
            .remaining(DayType::of_day(day), t - offset + 1)
            .into_iter()
            .map(|s| ForecastSession {
                arrival: offset + s.arrival,
                departure: offset + s.departure,
                energy: s.demand,
                max_power: s.max_power,
                tolerance: s.tolerance,
            })
            .collect()
    }
}
