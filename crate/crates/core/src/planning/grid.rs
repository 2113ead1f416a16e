//! Exhaustive search over charger-count pairs, one operation solve per
//! scenario and cell.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PlanningProblem;
use crate::analytics::satisfied_rate;
use crate::error::{Error, Result};
use crate::milp::SolveOptions;
use crate::operation::{solve_operation, OperationProblem};
use crate::parallel::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub m: usize,
    pub n: usize,
    /// Daily CAPEX, ¢.
    pub capex: f64,
    /// Weighted daily OPEX, ¢; `None` when a scenario solve failed.
    pub opex: Option<f64>,
    pub tco: Option<f64>,
    pub satisfied_rate: Option<f64>,
    /// Largest MIP gap over the scenario solves.
    pub gap: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// Ordered by `(m, n)`.
    pub cells: Vec<GridCell>,
}

impl GridSearchResult {
    pub fn cell(&self, m: usize, n: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.m == m && c.n == n)
    }

    /// Cheapest solved cell, optionally among those meeting `min_sr`.
    pub fn best(&self, min_sr: Option<f64>) -> Option<&GridCell> {
        self.cells
            .iter()
            .filter(|c| c.tco.is_some())
            .filter(|c| min_sr.is_none_or(|rho| c.satisfied_rate.unwrap_or(0.0) >= rho - 1e-9))
            .min_by(|a, b| a.tco.unwrap().total_cmp(&b.tco.unwrap()))
    }
}

/// Solves every cell of `m_range × n_range`. Failed solves are recorded in
/// the cell and do not abort the search.
pub fn grid_search(
    problem: &PlanningProblem,
    m_range: std::ops::RangeInclusive<usize>,
    n_range: std::ops::RangeInclusive<usize>,
    solver: &SolveOptions,
    exec: Execution,
) -> Result<GridSearchResult> {
    problem.validate()?;
    let scenarios = problem.clipped_scenarios();
    let cells: Vec<(usize, usize)> = m_range
        .flat_map(|m| n_range.clone().map(move |n| (m, n)))
        .collect();
    let cells = parallel::map(exec, &cells, |&(m, n)| {
        let station = problem.station_with(m, n);
        let capex = problem.capex_cents(m, n);
        let mut opex = 0.0;
        let mut sr = 0.0;
        let mut gap: f64 = 0.0;
        for scenario in &scenarios {
            let op = OperationProblem {
                scenario,
                grid: &problem.grid,
                station: &station,
                tariff: &problem.tariff,
                options: &problem.options,
            };
            let solved = solve_operation(&op, solver).and_then(|out| {
                let r = if scenario.is_empty() {
                    1.0
                } else {
                    satisfied_rate(&out.schedule, scenario, problem.tariff.sr_threshold)?
                };
                Ok((out, r))
            });
            match solved {
                Ok((out, r)) => {
                    opex += scenario.probability * out.costs.opex;
                    sr += scenario.probability * r;
                    gap = gap.max(out.gap);
                }
                Err(e) => {
                    log::warn!("cell ({m}, {n}) scenario `{}`: {e}", scenario.label);
                    return GridCell {
                        m,
                        n,
                        capex,
                        opex: None,
                        tco: None,
                        satisfied_rate: None,
                        gap: f64::INFINITY,
                        error: Some(e.to_string()),
                    };
                }
            }
        }
        GridCell {
            m,
            n,
            capex,
            opex: Some(opex),
            tco: Some(opex + capex),
            satisfied_rate: Some(sr),
            gap,
            error: None,
        }
    });
    Ok(GridSearchResult { cells })
}

#[derive(Serialize)]
struct HeatmapRow {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "TCO_daily_usd")]
    tco: Option<f64>,
    #[serde(rename = "OPEX_daily_usd")]
    opex: Option<f64>,
    #[serde(rename = "SR")]
    sr: Option<f64>,
    capex_daily_usd: f64,
}

/// Heatmap table, one row per cell; failed cells have empty cost fields.
pub fn write_heatmap_csv<W: Write>(result: &GridSearchResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in &result.cells {
        w.serialize(HeatmapRow {
            m: c.m,
            n: c.n,
            tco: c.tco.map(|v| v / 100.0),
            opex: c.opex.map(|v| v / 100.0),
            sr: c.satisfied_rate,
            capex_daily_usd: c.capex / 100.0,
        })?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}
