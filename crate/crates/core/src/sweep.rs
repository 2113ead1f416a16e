//! Sensitivity sweeps: re-plan the station while one index moves, and
//! compare with the best single-type stations.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytics::{csi, poi, rci, scale_demand};
use crate::config::Config;
use crate::domain::DemandScenario;
use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::planning::{solve_planning, PlanningProblem};
use crate::stochastic::{seeded, synthetic_pool, PoolDay, SessionPool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepIndex {
    /// Setting is `β^robo / β^fix`.
    Rci,
    /// Setting is the slack ratio of the synthetic pool.
    Csi,
    /// Setting shifts every session by that many hours.
    Poi,
    /// Setting scales the number of sessions.
    Dgi,
}

impl SweepIndex {
    pub fn name(self) -> &'static str {
        match self {
            SweepIndex::Rci => "rci",
            SweepIndex::Csi => "csi",
            SweepIndex::Poi => "poi",
            SweepIndex::Dgi => "dgi",
        }
    }

    /// A setting list spanning the range studied for each index.
    pub fn default_settings(self) -> Vec<f64> {
        match self {
            SweepIndex::Rci => vec![1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
            SweepIndex::Csi => vec![0.2, 0.35, 0.5, 0.65, 0.8],
            SweepIndex::Poi => vec![-4.0, -2.0, 0.0, 2.0, 4.0, 6.0],
            SweepIndex::Dgi => vec![0.5, 1.0, 1.5, 2.0],
        }
    }
}

impl std::str::FromStr for SweepIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rci" => Ok(SweepIndex::Rci),
            "csi" => Ok(SweepIndex::Csi),
            "poi" => Ok(SweepIndex::Poi),
            "dgi" => Ok(SweepIndex::Dgi),
            other => Err(Error::Config(format!("unknown index `{other}`"))),
        }
    }
}

/// TCOs in ¢/day; `None` where the solve failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub setting: f64,
    /// Index measured on the generated instance.
    pub value: f64,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub tco: Option<f64>,
    pub fc_only_tco: Option<f64>,
    pub rc_only_tco: Option<f64>,
}

/// Planning problem for one setting. Every setting redraws its scenarios
/// from the same seed.
pub fn sweep_problem(cfg: &Config, index: SweepIndex, setting: f64) -> Result<(PlanningProblem, f64)> {
    let mut cfg = cfg.clone();
    let mut rng = seeded(cfg.seed);
    let grid = cfg.time_grid()?;
    let mut pool = match index {
        SweepIndex::Csi => {
            if cfg.demand.pool.is_some() {
                return Err(Error::Config("a slackness sweep needs the synthetic pool".into()));
            }
            cfg.demand.synthetic.slackness = setting;
            synthetic_pool(&cfg.demand.synthetic, &grid, &mut rng)
        }
        _ => cfg.session_pool(&mut rng)?,
    };
    match index {
        SweepIndex::Rci => {
            if !(setting >= 0.0) {
                return Err(Error::Config(format!("capital ratio {setting} is negative")));
            }
            cfg.tariff.capital_rc = setting * cfg.tariff.capital_fc;
        }
        SweepIndex::Poi => pool = shift_pool(&pool, (setting / cfg.grid.step_hours).round() as i64, cfg.grid.steps),
        SweepIndex::Dgi => {
            pool = scale_demand(&pool, setting, &mut rng)?;
            for c in &mut cfg.demand.sessions {
                *c = (*c as f64 * setting).round() as usize;
            }
        }
        SweepIndex::Csi => {}
    }
    let scenarios = cfg.scenarios(&pool, &mut rng)?;
    let problem = cfg.planning_problem(scenarios)?;
    let value = measure(index, &problem, setting)?;
    Ok((problem, value))
}

fn weighted(scenarios: &[DemandScenario], f: impl Fn(&DemandScenario) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    let mut weight = 0.0;
    for s in scenarios.iter().filter(|s| !s.is_empty()) {
        total += s.probability * f(s)?;
        weight += s.probability;
    }
    Ok(if weight > 0.0 { total / weight } else { f64::NAN })
}

fn measure(index: SweepIndex, p: &PlanningProblem, setting: f64) -> Result<f64> {
    let eta = p.station.efficiency;
    let scenarios = p.clipped_scenarios();
    match index {
        SweepIndex::Rci => rci(&p.tariff),
        SweepIndex::Csi => weighted(&scenarios, |s| csi(s, &p.grid, eta)),
        SweepIndex::Poi => weighted(&scenarios, |s| poi(s, &p.tariff, eta)),
        SweepIndex::Dgi => Ok(setting),
    }
}

/// Moves every session by `shift` steps, cutting stays at the day bounds.
pub fn shift_pool(pool: &SessionPool, shift: i64, steps: usize) -> SessionPool {
    let last = steps as i64;
    SessionPool {
        days: pool
            .days
            .iter()
            .map(|d| {
                let mut sessions: Vec<_> = d
                    .sessions
                    .iter()
                    .map(|s| {
                        let a = (s.arrival as i64 + shift).clamp(0, last - 1);
                        let dep = (s.departure as i64 + shift).clamp(a + 1, last);
                        let mut moved = *s;
                        moved.arrival = a as usize;
                        moved.departure = dep as usize;
                        moved
                    })
                    .collect();
                sessions.sort_by_key(|s| (s.arrival, s.departure));
                PoolDay {
                    day_type: d.day_type,
                    sessions,
                }
            })
            .collect(),
    }
}

/// Solves every setting three times (mixed, fixed-only, robo-only), all
/// solves in parallel.
pub fn run_sweep(cfg: &Config, index: SweepIndex, settings: &[f64], exec: Execution) -> Result<Vec<SweepPoint>> {
    let problems = settings
        .iter()
        .map(|&s| sweep_problem(cfg, index, s))
        .collect::<Result<Vec<_>>>()?;
    let solver = cfg.solve_options();
    let jobs: Vec<(usize, u8)> = (0..problems.len()).flat_map(|k| [(k, 0u8), (k, 1), (k, 2)]).collect();
    let results = parallel::map(exec, &jobs, |&(k, kind)| {
        let mut p = problems[k].0.clone();
        match kind {
            1 => p.n_max = 0,
            2 => p.m_max = 0,
            _ => {}
        }
        solve_planning(&p, &solver).map_err(|e| {
            log::warn!("{} = {}: {e}", index.name(), settings[k]);
            e
        })
    });
    Ok(problems
        .iter()
        .enumerate()
        .map(|(k, (_, value))| {
            let mixed = results[3 * k].as_ref().ok();
            SweepPoint {
                setting: settings[k],
                value: *value,
                m: mixed.map(|r| r.m),
                n: mixed.map(|r| r.n),
                tco: mixed.map(|r| r.tco),
                fc_only_tco: results[3 * k + 1].as_ref().ok().map(|r| r.tco),
                rc_only_tco: results[3 * k + 2].as_ref().ok().map(|r| r.tco),
            }
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(index: SweepIndex, points: &[SweepPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "index",
        "setting",
        "value",
        "m_star",
        "n_star",
        "TCO_daily_usd",
        "FC_only_TCO_daily_usd",
        "RC_only_TCO_daily_usd",
    ])?;
    let usd = |c: Option<f64>| c.map(|v| format!("{:.4}", v / 100.0)).unwrap_or_default();
    let count = |c: Option<usize>| c.map(|v| v.to_string()).unwrap_or_default();
    for p in points {
        w.write_record([
            index.name().to_string(),
            p.setting.to_string(),
            format!("{:.6}", p.value),
            count(p.m),
            count(p.n),
            usd(p.tco),
            usd(p.fc_only_tco),
            usd(p.rc_only_tco),
        ])?;
    }
    w.flush()?;
    Ok(())
}
