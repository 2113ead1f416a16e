//! Variable-resolution look-ahead grid and the per-step scenario view.

use serde::{Deserialize, Serialize};

use crate::domain::{DemandScenario, OriginalDemand, Session, StationConfig, TariffAndCosts, TimeGrid, Tolerance};
use crate::error::{Error, Result};

use super::predict::ForecastSession;
use super::StationLog;

/// `count` look-ahead steps of `span` fine steps each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonBlock {
    pub count: usize,
    pub span: usize,
}

/// Look-ahead grid whose step boundaries fall on fine-step boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    grid: TimeGrid,
    /// Fine-step offset of every boundary, `steps + 1` entries.
    boundaries: Vec<usize>,
}

impl CoarseGrid {
    pub fn new(fine_dt: f64, blocks: &[HorizonBlock]) -> Result<Self> {
        let mut boundaries = vec![0];
        let mut lengths = Vec::new();
        for b in blocks {
            if b.span == 0 {
                return Err(Error::Config("look-ahead steps must span at least one fine step".into()));
            }
            for _ in 0..b.count {
                boundaries.push(boundaries.last().unwrap() + b.span);
                lengths.push(b.span as f64 * fine_dt);
            }
        }
        if lengths.is_empty() {
            return Err(Error::Config("look-ahead grid has no steps".into()));
        }
        if blocks.first().map(|b| b.span) != Some(1) {
            return Err(Error::Config("the first look-ahead step must be one fine step".into()));
        }
        Ok(Self {
            grid: TimeGrid::from_lengths(lengths)?,
            boundaries,
        })
    }

    /// 8 quarter-hours, 4 hours, then 9 two-hour steps: 24 h in 21 steps.
    pub fn standard_blocks() -> Vec<HorizonBlock> {
        vec![
            HorizonBlock { count: 8, span: 1 },
            HorizonBlock { count: 4, span: 4 },
            HorizonBlock { count: 9, span: 8 },
        ]
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.step_count()
    }

    /// Length of the look-ahead in fine steps.
    pub fn horizon_fine(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    /// Fine offsets covered by coarse step `k`.
    pub fn fine_range(&self, k: usize) -> std::ops::Range<usize> {
        self.boundaries[k]..self.boundaries[k + 1]
    }

    /// Last boundary at or before fine offset `offset`.
    pub fn snap_down(&self, offset: usize) -> usize {
        self.boundaries.partition_point(|&b| b <= offset) - 1
    }

    /// First boundary at or after `offset`; offsets past the horizon map to
    /// its end.
    pub fn snap_up(&self, offset: usize) -> usize {
        self.boundaries.partition_point(|&b| b < offset).min(self.steps())
    }
}

/// Day-periodic site inputs on the fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteProfile {
    pub fine_dt: f64,
    pub steps_per_day: usize,
    /// Per-PEV power limit, kW.
    pub max_power: f64,
    /// Charger counts, efficiency and one day of base load.
    pub station: StationConfig,
    /// Tariff with one day of TOU prices.
    pub tariff: TariffAndCosts,
}

impl SiteProfile {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_day == 0 || !(self.fine_dt > 0.0) {
            return Err(Error::Config("site profile needs a positive step length".into()));
        }
        if !(self.max_power > 0.0) || !self.max_power.is_finite() {
            return Err(Error::Config("site profile needs a positive power limit".into()));
        }
        self.station.validate(self.steps_per_day)?;
        self.tariff.validate(self.steps_per_day)?;
        Ok(())
    }

    pub fn tou(&self, t: usize) -> f64 {
        self.tariff.tou[t % self.steps_per_day]
    }

    pub fn base_load(&self, t: usize) -> f64 {
        self.station.base_load[t % self.steps_per_day]
    }

    /// Station and tariff seen by a look-ahead solve starting at fine step
    /// `t`: prices averaged over each coarse step, base load at its maximum.
    pub fn coarse_inputs(&self, coarse: &CoarseGrid, t: usize) -> (StationConfig, TariffAndCosts) {
        let mut station = self.station.clone();
        let mut tariff = self.tariff.clone();
        station.base_load = (0..coarse.steps())
            .map(|k| {
                coarse
                    .fine_range(k)
                    .map(|o| self.base_load(t + o))
                    .fold(0.0, f64::max)
            })
            .collect();
        tariff.tou = (0..coarse.steps())
            .map(|k| {
                let r = coarse.fine_range(k);
                let n = r.len() as f64;
                r.map(|o| self.tou(t + o)).sum::<f64>() / n
            })
            .collect();
        (station, tariff)
    }
}

/// Onsite PEVs at step `t` as sessions arriving at look-ahead step 0, in log
/// order. Remaining stays are measured from `departure_hint`, at least one
/// step, and targets are capped at what the remaining time allows.
pub fn build_onsite_view(log: &StationLog, t: usize, coarse: &CoarseGrid, fine_dt: f64, eta: f64) -> Result<Vec<Session>> {
    let horizon = coarse.horizon_fine();
    log.entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            if e.actual_departure <= t {
                return Err(Error::Data(format!("PEV {} departed at step {} but is still logged", e.id, e.actual_departure)));
            }
            let remaining = e.departure_hint.saturating_sub(t).max(1).min(horizon);
            let reachable = e.charge + remaining as f64 * fine_dt * e.max_power * eta;
            let target = e.target_charge.min(reachable).max(e.charge);
            Ok(Session {
                id: k,
                arrival: 0,
                departure: coarse.snap_up(remaining),
                demand: target - e.charge,
                init_charge: e.charge,
                target_charge: target,
                max_power: e.max_power,
                tolerance: Tolerance::INFINITE,
                preassigned: e.charger,
                original: Some(OriginalDemand {
                    init_charge: e.init_charge,
                    target_charge: e.original_target,
                }),
            })
        })
        .collect()
}

/// Onsite view plus the forecast sessions that arrive while some onsite PEV
/// is still present. Forecast arrivals snap down and departures snap up to
/// look-ahead boundaries.
pub fn merge_forecast(
    onsite: Vec<Session>,
    forecast: &[ForecastSession],
    t: usize,
    coarse: &CoarseGrid,
    eta: f64,
) -> DemandScenario {
    let horizon = coarse.horizon_fine();
    let last_departure = onsite.iter().map(|s| coarse.fine_range(s.departure - 1).end).max().unwrap_or(0);
    let mut sessions = onsite;
    for f in forecast {
        if f.arrival <= t {
            continue;
        }
        let rel_arrival = f.arrival - t;
        if rel_arrival >= horizon.min(last_departure) {
            continue;
        }
        let arrival = coarse.snap_down(rel_arrival);
        let departure = coarse.snap_up(f.departure.saturating_sub(t)).max(arrival + 1);
        let id = sessions.len();
        sessions.push(Session::new(id, arrival, departure, f.energy, f.max_power).with_tolerance(f.tolerance));
    }
    DemandScenario::new(format!("view@{t}"), 1.0, sessions).clipped(coarse.grid(), eta)
}
