//! Constraint blocks of the operation model for one demand scenario.
//!
//! Variables exist only over each session's presence window; plug and power
//! are implicitly zero elsewhere. Charge trajectories are affine expressions
//! of the power variables rather than separate columns.

use std::collections::HashMap;

use super::OperationOptions;
use crate::domain::{DemandScenario, Session, StationConfig, TariffAndCosts, TimeGrid, Tolerance};
use crate::error::{Error, Result};
use crate::milp::{LinExpr, Model, Var};

/// Charger counts seen by the blocks: constants for operation, shared
/// integer variables for planning.
#[derive(Debug, Clone)]
pub(crate) enum Counts {
    Fixed { m: usize, n: usize },
    /// `n = Σ k·delta[k]` with `Σ delta = 1`.
    Shared { m: Var, m_max: usize, delta: Vec<Var> },
}

impl Counts {
    fn m_expr(&self) -> LinExpr {
        match self {
            Counts::Fixed { m, .. } => LinExpr::constant(*m as f64),
            Counts::Shared { m, .. } => (*m).into(),
        }
    }

    fn n_expr(&self) -> LinExpr {
        match self {
            Counts::Fixed { n, .. } => LinExpr::constant(*n as f64),
            Counts::Shared { delta, .. } => {
                let mut e = LinExpr::new();
                for (k, d) in delta.iter().enumerate() {
                    e.add_term(*d, k as f64);
                }
                e
            }
        }
    }

    fn m_max(&self) -> usize {
        match self {
            Counts::Fixed { m, .. } => *m,
            Counts::Shared { m_max, .. } => *m_max,
        }
    }

    fn n_max(&self) -> usize {
        match self {
            Counts::Fixed { n, .. } => *n,
            Counts::Shared { delta, .. } => delta.len() - 1,
        }
    }

    /// RC queue capacity `K` for a driver with tolerance `omega`.
    fn k_expr(&self, omega: Tolerance, sessions: usize) -> LinExpr {
        match self {
            Counts::Fixed { n, .. } => LinExpr::constant(omega.queue_capacity(*n, sessions) as f64),
            Counts::Shared { delta, .. } => {
                let mut e = LinExpr::new();
                for (k, d) in delta.iter().enumerate() {
                    e.add_term(*d, omega.queue_capacity(k, sessions) as f64);
                }
                e
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SessionVars {
    pub fix: Var,
    pub robo: Var,
    pub leave: Var,
    /// Indexed by `t − arrival`.
    pub plug: Vec<Var>,
    pub power: Vec<Var>,
    pub q_fix: LinExpr,
    /// `None` when the RC capacity exceeds every possible queue and the
    /// indicator terms were not built.
    pub q_robo: Option<LinExpr>,
    pub v_fix: LinExpr,
    pub v_robo: Option<LinExpr>,
    pub unsat: Vec<Var>,
}

/// Cost components of one scenario, in cents.
#[derive(Debug, Clone, Default)]
pub(crate) struct CostExprs {
    pub tou: LinExpr,
    pub fee: LinExpr,
    pub demand: LinExpr,
    pub switching: LinExpr,
    pub disappointment: LinExpr,
}

impl CostExprs {
    pub fn opex(&self) -> LinExpr {
        self.tou.clone() - self.fee.clone()
            + self.demand.clone()
            + self.switching.clone()
            + self.disappointment.clone()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ScenarioBlock {
    pub sessions: Vec<SessionVars>,
    pub peak: Var,
    pub costs: CostExprs,
}

impl SessionVars {
    /// Charge at the start of step `t` (`arrival ≤ t ≤ departure`).
    pub fn charge(&self, session: &Session, t: usize, grid: &TimeGrid, eta: f64) -> LinExpr {
        let mut e = LinExpr::constant(session.init_charge);
        for tau in session.arrival..t {
            e.add_term(self.power[tau - session.arrival], eta * grid.step_length(tau));
        }
        e
    }

    /// Energy delivered by the departure step.
    pub fn delivered(&self, session: &Session, grid: &TimeGrid, eta: f64) -> LinExpr {
        self.charge(session, session.departure, grid, eta) - session.init_charge
    }
}

/// Shared inputs of every block.
pub(crate) struct BlockInput<'a> {
    pub scenario: &'a DemandScenario,
    pub grid: &'a TimeGrid,
    pub station: &'a StationConfig,
    pub tariff: &'a TariffAndCosts,
    pub options: &'a OperationOptions,
}

impl BlockInput<'_> {
    pub fn validate(&self) -> Result<()> {
        let steps = self.grid.step_count();
        self.scenario.validate(steps)?;
        self.station.validate(steps)?;
        self.tariff.validate(steps)?;
        if !self.scenario.is_clipped(self.grid, self.station.efficiency) {
            return Err(Error::Data(format!(
                "scenario `{}` has targets beyond what the charging windows allow; clip them first",
                self.scenario.label
            )));
        }
        if !(self.options.demand_charge_floor >= 0.0) {
            return Err(Error::Config("demand charge floor must be non-negative".into()));
        }
        Ok(())
    }

    pub fn demand_charge_rate(&self) -> f64 {
        self.options
            .demand_charge_rate
            .unwrap_or_else(|| self.tariff.demand_charge_cents(self.grid.horizon_hours()))
    }

    fn tolerance(&self, s: &Session) -> Tolerance {
        self.options.tolerance.unwrap_or(s.tolerance)
    }
}

/// Builds every operation block for one scenario into `model`. Names are
/// prefixed with `tag` so several scenarios can share a model.
pub(crate) fn build_scenario(
    model: &mut Model,
    input: &BlockInput<'_>,
    counts: &Counts,
    tag: &str,
    shared_peak: Option<Var>,
) -> Result<ScenarioBlock> {
    input.validate()?;
    let grid = input.grid;
    let steps = grid.step_count();
    let eta = input.station.efficiency;
    let sessions = &input.scenario.sessions;
    let eps = input.options.full_charge_eps;

    // assignment and energy blocks
    let mut vars = Vec::with_capacity(sessions.len());
    for (i, s) in sessions.iter().enumerate() {
        let fix = model.binary(format!("fix{tag}_{i}"));
        let robo = model.binary(format!("robo{tag}_{i}"));
        let leave = model.binary(format!("leave{tag}_{i}"));
        model.add_eq(format!("assign{tag}_{i}"), fix + robo + leave, 1.0)?;
        if counts.m_max() == 0 {
            model.set_bounds(fix, 0.0, 0.0);
        }
        if counts.n_max() == 0 {
            model.set_bounds(robo, 0.0, 0.0);
        }
        match s.preassigned {
            Some(crate::domain::ChargerType::Fix) => model.set_bounds(fix, 1.0, 1.0),
            Some(crate::domain::ChargerType::Robo) => model.set_bounds(robo, 1.0, 1.0),
            None => {}
        }
        if let Counts::Shared { delta, .. } = counts {
            // robo assignment needs at least one RC
            model.add_le(format!("robo_n{tag}_{i}"), robo, LinExpr::constant(1.0) - delta[0])?;
        }

        let mut plug = Vec::with_capacity(s.duration_steps());
        let mut power = Vec::with_capacity(s.duration_steps());
        let mut window = LinExpr::new();
        for t in s.arrival..s.departure {
            let x = model.binary(format!("plug{tag}_{i}_{t}"));
            model.add_ge(format!("plug_fix{tag}_{i}_{t}"), x, fix)?;
            model.add_le(format!("plug_stay{tag}_{i}_{t}"), x, LinExpr::constant(1.0) - leave)?;
            let p = model.continuous(format!("p{tag}_{i}_{t}"), 0.0, s.max_power);
            if input.options.discrete_power {
                let y = model.binary(format!("y{tag}_{i}_{t}"));
                model.add_le(format!("y_plug{tag}_{i}_{t}"), y, x)?;
                model.add_eq(format!("p_level{tag}_{i}_{t}"), p, y * s.max_power)?;
            } else {
                model.add_le(format!("p_plug{tag}_{i}_{t}"), p, x * s.max_power)?;
            }
            let w = eta * grid.step_length(t);
            window.add_term(p, w);
            plug.push(x);
            power.push(p);
        }
        // Curtailed power is projected out: with clipped targets it can always
        // top the virtual charge up, so only the no-overcharge side remains.
        model.add_le(format!("virtual_target{tag}_{i}"), window + leave * s.demand, s.demand)?;

        // A fixed charger is held for the whole stay, so whatever it delivers
        // counts against the demand; only plugged robo time adds more.
        if model.var(fix).upper > 0.0 && model.var(robo).upper > 0.0 && model.var(fix).lower < 1.0 {
            let mut rhs = LinExpr::term(fix, s.demand);
            let mut lhs = LinExpr::new();
            for (k, t) in (s.arrival..s.departure).enumerate() {
                let w = eta * grid.step_length(t);
                lhs.add_term(power[k], w);
                rhs.add_term(plug[k], w * s.max_power);
                rhs.add_term(fix, -w * s.max_power);
            }
            model.add_le(format!("fix_share{tag}_{i}"), lhs, rhs)?;
        }

        vars.push(SessionVars {
            fix,
            robo,
            leave,
            plug,
            power,
            q_fix: LinExpr::new(),
            q_robo: None,
            v_fix: LinExpr::new(),
            v_robo: None,
            unsat: Vec::new(),
        });
    }

    // capacity
    let m_expr = counts.m_expr();
    let n_expr = counts.n_expr();
    for t in 0..steps {
        let present: Vec<usize> = (0..sessions.len()).filter(|&i| sessions[i].is_present(t)).collect();
        if present.is_empty() {
            continue;
        }
        let fc = LinExpr::sum(present.iter().map(|&i| vars[i].fix));
        model.add_le(format!("fc_cap{tag}_{t}"), fc, m_expr.clone())?;
        if counts.n_max() > 0 {
            let mut rc = LinExpr::new();
            for &i in &present {
                rc.add_term(vars[i].plug[t - sessions[i].arrival], 1.0);
                rc.add_term(vars[i].fix, -1.0);
            }
            model.add_le(format!("rc_cap{tag}_{t}"), rc, n_expr.clone())?;
        }
    }


    // leave-or-wait queue block
    let mut waiting: HashMap<(usize, usize), Var> = HashMap::new();
    let n_sessions = sessions.len();
    for i in 0..sessions.len() {
        let t_i = sessions[i].arrival;
        let preds: Vec<usize> = (0..i).filter(|&j| sessions[j].is_present(t_i)).collect();
        let q_fix = LinExpr::sum(preds.iter().map(|&j| vars[j].fix));
        let v_fix = m_expr.clone() - q_fix.clone();

        let k = counts.k_expr(input.tolerance(&sessions[i]), n_sessions);
        let mut q_robo = LinExpr::new();
        let (k_lo, _) = k.range(model);
        let robo_preds: Vec<usize> = preds
            .iter()
            .copied()
            .filter(|&j| sessions[j].demand > eps && model.var(vars[j].robo).upper > 0.0)
            .collect();
        // A capacity above every possible queue leaves vacancies regardless.
        let queue_matters = k_lo < robo_preds.len() as f64 + 1.0;
        if queue_matters {
            for &j in &robo_preds {
                let w = match waiting.get(&(j, t_i)) {
                    Some(&w) => w,
                    None => {
                        let shortfall = LinExpr::constant(sessions[j].target_charge)
                            - vars[j].charge(&sessions[j], t_i, grid, eta);
                        if shortfall.range(model).0 >= eps {
                            // cannot be full yet: queued whenever on a robo-charger
                            waiting.insert((j, t_i), vars[j].robo);
                            q_robo.add_term(vars[j].robo, 1.0);
                            continue;
                        }
                        let z = model.shortfall_indicator(
                            &format!("unfull{tag}_{j}_{t_i}"),
                            shortfall,
                            sessions[j].demand,
                            eps,
                        )?;
                        let w = model.and(&format!("rcq{tag}_{j}_{t_i}"), vars[j].robo, z)?;
                        waiting.insert((j, t_i), w);
                        w
                    }
                };
                q_robo.add_term(w, 1.0);
            }
        }
        let diff = k - q_robo.clone();
        let (lo, hi) = diff.range(model);
        let v_robo = if hi <= 0.0 {
            LinExpr::new()
        } else if lo >= 0.0 {
            diff
        } else {
            model.pos_part(&format!("vrobo{tag}_{i}"), diff, hi.max(-lo))?.into()
        };

        let leave = vars[i].leave;
        let (fix_lo, fix_hi) = v_fix.range(model);
        let (robo_lo, robo_hi) = v_robo.range(model);
        let vsum_lo = fix_lo.max(0.0) + robo_lo;
        let vsum_hi = fix_hi + robo_hi;
        if sessions[i].preassigned.is_some() {
            // already admitted; the leave-or-wait rule only screens arrivals
        } else if vsum_hi < 0.5 {
            model.set_bounds(leave, 1.0, 1.0);
        } else if vsum_lo >= 1.0 - 1e-9 {
            model.set_bounds(leave, 0.0, 0.0);
        } else {
            model.leave_rule_split(
                &format!("leave_rule{tag}_{i}"),
                &[(v_fix.clone(), fix_hi.max(0.0)), (v_robo.clone(), robo_hi.max(0.0))],
                leave,
            )?;
        }
        let sv = &mut vars[i];
        sv.q_fix = q_fix;
        sv.q_robo = queue_matters.then_some(q_robo);
        sv.v_fix = v_fix;
        sv.v_robo = queue_matters.then_some(v_robo);
    }

    // cost block
    let tariff = input.tariff;
    let mut costs = CostExprs::default();
    for (i, s) in sessions.iter().enumerate() {
        for t in s.arrival..s.departure {
            let p = vars[i].power[t - s.arrival];
            let dt = grid.step_length(t);
            costs.tou.add_term(p, tariff.tou[t] * dt);
            costs.fee.add_term(p, tariff.fee * dt);
        }
    }

    let peak = match shared_peak {
        Some(v) => v,
        None => model.continuous(format!("pdc{tag}"), input.options.demand_charge_floor, f64::INFINITY),
    };
    for t in 0..steps {
        let mut load = LinExpr::constant(input.station.base_load[t]);
        for (i, s) in sessions.iter().enumerate() {
            if s.is_present(t) {
                load.add_term(vars[i].power[t - s.arrival], 1.0);
            }
        }
        if load.terms.is_empty() && shared_peak.is_none() && load.constant <= input.options.demand_charge_floor {
            continue;
        }
        model.add_ge(format!("peak{tag}_{t}"), peak, load)?;
    }
    costs.demand = LinExpr::term(peak, input.demand_charge_rate());

    for (i, s) in sessions.iter().enumerate() {
        let plug_at = |t: usize| -> LinExpr {
            if s.is_present(t) {
                vars[i].plug[t - s.arrival].into()
            } else {
                LinExpr::new()
            }
        };
        let first = s.arrival.saturating_sub(1);
        let last = s.departure.min(steps - 1);
        for t in first..last {
            let diff = plug_at(t + 1) - plug_at(t);
            let x = model.continuous(format!("switch{tag}_{i}_{t}"), 0.0, 1.0);
            model.add_ge(format!("switch_up{tag}_{i}_{t}"), x, diff.clone())?;
            model.add_ge(format!("switch_dn{tag}_{i}_{t}"), x, -diff)?;
            costs.switching.add_term(x, tariff.switch_cost);
        }
    }

    for (i, s) in sessions.iter().enumerate() {
        let (base_init, base_demand) = s.penalty_basis();
        let delivered = vars[i].delivered(s, grid, eta) + (s.init_charge - base_init);
        for (k, tier) in tariff.unsat_penalties.iter().enumerate() {
            let need = tier.threshold * base_demand;
            if need <= 0.0 {
                continue;
            }
            let u = model.continuous(format!("unsat{tag}_{i}_{k}"), 0.0, need);
            let leave = vars[i].leave;
            model.add_ge(
                format!("unsat_def{tag}_{i}_{k}"),
                u + delivered.clone() + leave * need,
                need,
            )?;
            costs.disappointment.add_term(u, tier.rate);
            vars[i].unsat.push(u);
        }
    }

    Ok(ScenarioBlock {
        sessions: vars,
        peak,
        costs,
    })
}
