use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::stochastic::{sample_trace, seeded, NaiveForecaster, TraceSession};

use super::{run_rolling, CompleteInformation, ExecutedRun, NaivePredictor, NoForecast, Predictor, StayRule};

/// What the controller knows about future arrivals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMode {
    /// Onsite PEVs only.
    None,
    /// Typical day profile from the session pool.
    #[default]
    Naive,
    /// Realised arrivals and departures.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub days: usize,
    pub seed: u64,
    pub fc_count: usize,
    pub rc_count: usize,
    pub forecast: ForecastMode,
    /// Drivers follow the operation model's rule instead of the sigmoid.
    pub deterministic_stay: bool,
}

/// A sampled demand trace and the controller's run over it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trace: Vec<TraceSession>,
    pub run: ExecutedRun,
}

/// Samples `spec.days` days of demand from the configured pool and runs
/// the controller over them. Everything is drawn from one stream seeded by
/// `spec.seed`.
pub fn simulate(cfg: &Config, spec: &SimSpec) -> Result<Simulation> {
    if spec.days == 0 {
        return Err(Error::Config("simulation needs at least one day".into()));
    }
    let mut rng = seeded(spec.seed);
    let pool = cfg.session_pool(&mut rng)?;
    let site = cfg.site_profile(spec.fc_count, spec.rc_count)?;
    let trace = sample_trace(&pool, spec.days, site.steps_per_day, &cfg.behavior, &mut rng)?;
    let mut params = cfg.mpc.clone();
    params.known_departures |= spec.forecast == ForecastMode::Complete;
    let predictor: Box<dyn Predictor> = match spec.forecast {
        ForecastMode::None => Box::new(NoForecast),
        ForecastMode::Naive => Box::new(NaivePredictor {
            forecaster: NaiveForecaster::new(&pool, site.max_power, &cfg.time_grid()?, &mut rng)?,
            steps_per_day: site.steps_per_day,
        }),
        ForecastMode::Complete => Box::new(CompleteInformation::new(&trace, site.max_power)),
    };
    let rule = if spec.deterministic_stay {
        StayRule::Deterministic
    } else {
        StayRule::Sigmoid(cfg.behavior)
    };
    let steps = spec.days * site.steps_per_day;
    let run = run_rolling(&trace, predictor.as_ref(), &site, &params, &rule, steps, &mut rng)?;
    Ok(Simulation { trace, run })
}
