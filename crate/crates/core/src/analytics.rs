//! Sensitivity indices, satisfied rate and annual accounting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CostBreakdown, DemandScenario, Schedule, StationConfig, TariffAndCosts, TimeGrid};
use crate::error::{Error, Result};
use crate::stochastic::{PoolDay, SessionPool, SimRng};

/// Capital-cost ratio of one robo-charger to one fixed charger.
pub fn rci(tariff: &TariffAndCosts) -> Result<f64> {
    if tariff.capital_fc <= 0.0 {
        return Err(Error::Config("fixed-charger capital cost must be positive".into()));
    }
    Ok(tariff.capital_rc / tariff.capital_fc)
}

/// Mean share of each stay not needed for charging at full power.
pub fn csi(scenario: &DemandScenario, grid: &TimeGrid, eta: f64) -> Result<f64> {
    if scenario.is_empty() {
        return Err(Error::Data("charging slackness of an empty scenario".into()));
    }
    let total: f64 = scenario
        .sessions
        .iter()
        .map(|s| {
            let stay = grid.window_hours(s.arrival, s.departure);
            let busy = s.demand / (eta * s.max_power);
            ((stay - busy) / stay).clamp(0.0, 1.0)
        })
        .sum();
    Ok(total / scenario.len() as f64)
}

/// Share of demand that falls on peak-price steps when every session
/// charges at a uniform rate over its stay.
pub fn poi(scenario: &DemandScenario, tariff: &TariffAndCosts, eta: f64) -> Result<f64> {
    let total: f64 = scenario.sessions.iter().map(|s| s.demand).sum();
    if !(total > 0.0) {
        return Err(Error::Data("peak overlap needs positive total demand".into()));
    }
    let peak = tariff.peak_price();
    let mut on_peak = 0.0;
    for s in &scenario.sessions {
        let rate = s.demand / (eta * s.duration_steps() as f64);
        on_peak += (s.arrival..s.departure).filter(|&t| tariff.tou[t] == peak).count() as f64 * rate;
    }
    Ok(on_peak / total)
}

/// Resamples every historical day with its session count scaled by `dgi`.
/// Fractional counts are rounded stochastically; sessions are drawn with
/// replacement from the same day, or from its day type when the day is
/// empty.
pub fn scale_demand(pool: &SessionPool, dgi: f64, rng: &mut SimRng) -> Result<SessionPool> {
    if !(dgi >= 0.0) || !dgi.is_finite() {
        return Err(Error::Config(format!("demand growth index must be non-negative, got {dgi}")));
    }
    if dgi == 1.0 {
        return Ok(pool.clone());
    }
    let days = pool
        .days
        .iter()
        .map(|day| {
            let scaled = day.sessions.len() as f64 * dgi;
            let mut count = scaled.floor() as usize;
            if rng.random::<f64>() < scaled - scaled.floor() {
                count += 1;
            }
            let source: Vec<_> = if day.sessions.is_empty() {
                pool.sessions(day.day_type).copied().collect()
            } else {
                day.sessions.clone()
            };
            let mut sessions: Vec<_> = if source.is_empty() {
                Vec::new()
            } else {
                (0..count).map(|_| source[rng.random_range(0..source.len())]).collect()
            };
            sessions.sort_by_key(|p| (p.arrival, p.departure));
            PoolDay {
                day_type: day.day_type,
                sessions,
            }
        })
        .collect();
    Ok(SessionPool { days })
}

/// Whether session `i` received at least `threshold` of its (clipped)
/// demand. Zero-demand sessions always count as satisfied.
pub fn is_satisfied(schedule: &Schedule, scenario: &DemandScenario, i: usize, threshold: f64) -> bool {
    let s = &scenario.sessions[i];
    s.demand <= 0.0 || schedule.delivered(i, s) >= threshold * s.demand - 1e-6 * s.demand.max(1.0)
}

/// Fraction of sessions, leaving ones included, that were satisfied.
pub fn satisfied_rate(schedule: &Schedule, scenario: &DemandScenario, threshold: f64) -> Result<f64> {
    if scenario.is_empty() {
        return Err(Error::Data("satisfied rate of an empty scenario".into()));
    }
    let ok = (0..scenario.len())
        .filter(|&i| is_satisfied(schedule, scenario, i, threshold))
        .count();
    Ok(ok as f64 / scenario.len() as f64)
}

/// Dollar figures derived from a daily cost breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualReport {
    pub opex_daily_usd: f64,
    pub capex_daily_usd: f64,
    pub tco_daily_usd: f64,
    /// `−365 ·` daily TCO.
    pub annual_profit_usd: f64,
}

pub fn annualize(daily: &CostBreakdown, station: &StationConfig, tariff: &TariffAndCosts) -> AnnualReport {
    let capex = tariff.capex_cents_per_day(station.fc_count, station.rc_count) / 100.0;
    let opex = daily.opex / 100.0;
    let tco = opex + capex;
    AnnualReport {
        opex_daily_usd: opex,
        capex_daily_usd: capex,
        tco_daily_usd: tco,
        annual_profit_usd: -365.0 * tco,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PenaltyTier, Session};
    use crate::stochastic::{seeded, DayType, PoolSession};

    fn tariff(tou: Vec<f64>) -> TariffAndCosts {
        TariffAndCosts {
            tou,
            fee: 35.0,
            demand_charge: 18.0,
            billing_days: 30.0,
            switch_cost: 1.0,
            unsat_penalties: vec![PenaltyTier { rate: 10.0, threshold: 1.0 }],
            capital_fc: 5400.0,
            capital_rc: 10800.0,
            lifespan_years: 10.0,
            sr_threshold: 0.9,
            sr_requirement: 0.9,
        }
    }

    #[test]
    fn capital_ratio() {
        let mut t = tariff(vec![11.0]);
        assert_eq!(rci(&t).unwrap(), 2.0);
        t.capital_rc = 5400.0;
        assert_eq!(rci(&t).unwrap(), 1.0);
        t.capital_rc = 0.0;
        assert_eq!(rci(&t).unwrap(), 0.0);
        t.capital_fc = 0.0;
        assert!(rci(&t).is_err());
    }

    #[test]
    fn slackness() {
        let grid = TimeGrid::uniform(16, 0.25).unwrap();
        let one = DemandScenario::new("a", 1.0, vec![Session::new(0, 0, 16, 6.6, 6.6)]);
        assert!((csi(&one, &grid, 1.0).unwrap() - 0.75).abs() < 1e-12);
        let tight = DemandScenario::new("b", 1.0, vec![Session::new(0, 0, 4, 6.6, 6.6)]);
        assert_eq!(csi(&tight, &grid, 1.0).unwrap(), 0.0);
        let idle = DemandScenario::new("c", 1.0, vec![Session::new(0, 0, 4, 0.0, 6.6)]);
        assert_eq!(csi(&idle, &grid, 1.0).unwrap(), 1.0);
        assert!(csi(&DemandScenario::new("d", 1.0, vec![]), &grid, 1.0).is_err());
    }

    #[test]
    fn peak_overlap() {
        let t = tariff(vec![11.0, 34.0, 11.0, 34.0]);
        let off = DemandScenario::new("a", 1.0, vec![Session::new(0, 0, 1, 1.0, 6.6)]);
        assert_eq!(poi(&off, &t, 1.0).unwrap(), 0.0);
        let on = DemandScenario::new("b", 1.0, vec![Session::new(0, 1, 2, 1.0, 6.6)]);
        assert_eq!(poi(&on, &t, 1.0).unwrap(), 1.0);
        let half = DemandScenario::new("c", 1.0, vec![Session::new(0, 0, 2, 1.0, 6.6)]);
        assert_eq!(poi(&half, &t, 1.0).unwrap(), 0.5);
        let scaled = DemandScenario::new("d", 1.0, vec![Session::new(0, 0, 2, 3.0, 6.6), Session::new(1, 1, 4, 6.0, 6.6)]);
        let base = DemandScenario::new("e", 1.0, vec![Session::new(0, 0, 2, 1.0, 6.6), Session::new(1, 1, 4, 2.0, 6.6)]);
        assert!((poi(&scaled, &t, 1.0).unwrap() - poi(&base, &t, 1.0).unwrap()).abs() < 1e-12);
        let zero = DemandScenario::new("f", 1.0, vec![Session::new(0, 0, 2, 0.0, 6.6)]);
        assert!(poi(&zero, &t, 1.0).is_err());
    }

    fn pool() -> SessionPool {
        let day = |n: usize| PoolDay {
            day_type: DayType::Weekday,
            sessions: (0..n)
                .map(|k| PoolSession {
                    arrival: k,
                    departure: k + 4,
                    energy: 5.0,
                })
                .collect(),
        };
        SessionPool {
            days: vec![day(10), day(7), day(0)],
        }
    }

    #[test]
    fn demand_growth() {
        let p = pool();
        assert_eq!(scale_demand(&p, 1.0, &mut seeded(0)).unwrap(), p);
        let none = scale_demand(&p, 0.0, &mut seeded(0)).unwrap();
        assert!(none.is_empty());
        let double = scale_demand(&p, 2.0, &mut seeded(0)).unwrap();
        assert_eq!(double.daily_counts(DayType::Weekday), vec![20, 14, 0]);
        assert!(double.sessions(DayType::Weekday).all(|s| s.energy == 5.0));
        let mut rng = seeded(1);
        let mean: f64 = (0..2000)
            .map(|_| scale_demand(&p, 1.25, &mut rng).unwrap().len() as f64)
            .sum::<f64>()
            / 2000.0;
        assert!((mean - 17.0 * 1.25).abs() < 0.05, "{mean}");
        assert!(scale_demand(&p, -1.0, &mut rng).is_err());
    }

    #[test]
    fn satisfied_counts() {
        let grid = TimeGrid::uniform(4, 0.25).unwrap();
        let sessions: Vec<Session> = (0..10).map(|i| Session::new(i, 0, 4, 1.0, 6.6)).collect();
        let scenario = DemandScenario::new("s", 1.0, sessions);
        let mut schedule = Schedule::all_leave(&scenario, &grid, 10, 0);
        assert_eq!(satisfied_rate(&schedule, &scenario, 0.9).unwrap(), 0.0);
        for i in 0..10 {
            schedule.charge[i][4] = if i < 9 { 0.9 } else { 0.5 };
        }
        assert!((satisfied_rate(&schedule, &scenario, 0.9).unwrap() - 0.9).abs() < 1e-12);
        for i in 0..10 {
            schedule.charge[i][4] = 1.0;
        }
        assert_eq!(satisfied_rate(&schedule, &scenario, 0.9).unwrap(), 1.0);
    }

    #[test]
    fn annual_figures() {
        let t = tariff(vec![11.0]);
        let station = StationConfig::new(3, 4, 1);
        let r = annualize(&CostBreakdown::default(), &station, &t);
        assert!((r.capex_daily_usd - 16.27).abs() < 0.01);
        let daily = CostBreakdown::new(0.0, 1434.0 + 1627.4, 0.0, 0.0, 0.0, 0.0);
        let r = annualize(&daily, &station, &t);
        assert!((r.tco_daily_usd + 14.34).abs() < 0.01);
        assert!((r.annual_profit_usd - 5234.0).abs() < 2.0);
    }
}
