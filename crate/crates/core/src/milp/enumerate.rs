//! Exhaustive reference solver for tiny models.
//!
//! Every integral variable is enumerated over its (finite) bound range;
//! continuous variables are either enumerated over a caller-supplied grid or,
//! when no grid is given, left to an LP solve with the enumerated variables
//! fixed. The result is the exact optimum of the discretised problem.

use std::collections::HashMap;
use std::time::Instant;

use super::backend::{solve, SolveOptions, SolveResult, SolveStatus, FEASIBILITY_TOL};
use super::{Model, Var};
use crate::error::MilpError;

/// Largest number of enumerated points accepted.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// Explicit candidate values for selected variables.
#[derive(Debug, Clone, Default)]
pub struct Domains {
    values: HashMap<Var, Vec<f64>>,
}

impl Domains {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: Var, values: Vec<f64>) -> &mut Self {
        self.values.insert(var, values);
        self
    }

    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.values.get(&var).map(Vec::as_slice)
    }
}

fn integer_range(model: &Model, v: Var) -> Result<Vec<f64>, MilpError> {
    let d = model.var(v);
    if !d.lower.is_finite() || !d.upper.is_finite() {
        return Err(MilpError::UnboundedDomain(d.name.clone()));
    }
    let lo = (d.lower - 1e-9).ceil() as i64;
    let hi = (d.upper + 1e-9).floor() as i64;
    if (hi - lo) as f64 > ENUMERATION_LIMIT {
        return Err(MilpError::SearchSpaceTooLarge((hi - lo) as f64));
    }
    Ok((lo..=hi).map(|k| k as f64).collect())
}

/// Minimises `model` by enumeration. Returns `Infeasible` when no point of
/// the enumerated space is feasible.
pub fn enumerate_oracle(model: &Model, domains: &Domains) -> Result<SolveResult, MilpError> {
    let started = Instant::now();
    let mut axes: Vec<(Var, Vec<f64>)> = Vec::new();
    let mut free = Vec::new();
    for v in model.var_handles() {
        let d = model.var(v);
        if let Some(vals) = domains.get(v) {
            let vals: Vec<f64> = vals
                .iter()
                .copied()
                .filter(|&x| x >= d.lower - FEASIBILITY_TOL && x <= d.upper + FEASIBILITY_TOL)
                .collect();
            axes.push((v, vals));
        } else if d.kind.is_integral() {
            axes.push((v, integer_range(model, v)?));
        } else {
            free.push(v);
        }
    }
    let size: f64 = axes.iter().map(|(_, vals)| vals.len() as f64).product();
    if size > ENUMERATION_LIMIT {
        return Err(MilpError::SearchSpaceTooLarge(size));
    }
    if axes.iter().any(|(_, vals)| vals.is_empty()) {
        return Ok(SolveResult::infeasible(started.elapsed().as_secs_f64()));
    }

    let objective = model.compact_objective();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut index = vec![0usize; axes.len()];
    let mut point = vec![0.0; model.num_vars()];
    for v in &free {
        point[v.index()] = model.var(*v).lower;
    }
    loop {
        for ((v, vals), &k) in axes.iter().zip(&index) {
            point[v.index()] = vals[k];
        }
        let candidate = if free.is_empty() {
            model
                .is_feasible(&point, FEASIBILITY_TOL)
                .then(|| (objective.evaluate(&point), point.clone()))
        } else {
            let mut lp = model.clone();
            for (v, _) in &axes {
                lp.fix(*v, point[v.index()]);
            }
            let r = solve(&lp, &SolveOptions::exact())?;
            match r.status {
                SolveStatus::Optimal => Some((r.objective, r.values)),
                _ => None,
            }
        };
        if let Some((obj, values)) = candidate {
            if best.as_ref().is_none_or(|(b, _)| obj < *b - 1e-12) {
                best = Some((obj, values));
            }
        }

        // odometer increment
        let mut pos = 0;
        loop {
            if pos == axes.len() {
                let wall_time = started.elapsed().as_secs_f64();
                return Ok(match best {
                    Some((objective, values)) => SolveResult {
                        status: SolveStatus::Optimal,
                        objective,
                        values,
                        gap: 0.0,
                        wall_time,
                    },
                    None => SolveResult::infeasible(wall_time),
                });
            }
            index[pos] += 1;
            if index[pos] < axes[pos].1.len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}
