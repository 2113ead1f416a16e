//! Linearisations of the nonlinear terms in the station models. Every big-M
//! constant is passed in by the caller and derived from problem data.

use super::{LinExpr, Model, Var, VarKind};
use crate::error::MilpError;

impl Model {
    fn require_binary(&self, v: Var) -> Result<(), MilpError> {
        let d = self.var(v);
        if d.kind == VarKind::Binary {
            Ok(())
        } else {
            Err(MilpError::NotBinary(d.name.clone()))
        }
    }

    /// `w = b1 · b2` for binaries:
    /// `w ≤ b1`, `w ≤ b2`, `w ≥ b1 + b2 − 1`.
    pub fn and(&mut self, name: &str, b1: Var, b2: Var) -> Result<Var, MilpError> {
        self.require_binary(b1)?;
        self.require_binary(b2)?;
        let w = self.binary(name);
        self.add_le(format!("{name}_le1"), w, b1)?;
        self.add_le(format!("{name}_le2"), w, b2)?;
        self.add_ge(format!("{name}_ge"), w, b1 + b2 - 1.0)?;
        Ok(w)
    }

    /// `v = max{expr, 0}` given `|expr| ≤ upper` at feasible points.
    ///
    /// With `b = 𝟏{expr > 0}`: `v ≥ expr`, `v ≥ 0`, `v ≤ expr + U(1−b)`, `v ≤ U·b`.
    pub fn pos_part(&mut self, name: &str, expr: LinExpr, upper: f64) -> Result<Var, MilpError> {
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(MilpError::InvalidParameter(format!(
                "{name}: positive-part bound must be finite and positive, got {upper}"
            )));
        }
        let v = self.continuous(name, 0.0, upper);
        let b = self.binary(format!("{name}_pos"));
        self.add_ge(format!("{name}_ge"), v, expr.clone())?;
        self.add_le(
            format!("{name}_le_expr"),
            v,
            expr + upper - LinExpr::term(b, upper),
        )?;
        self.add_le(format!("{name}_le_b"), v, b * upper)?;
        Ok(v)
    }

    /// `z = 𝟏{shortfall ≥ ε}` for `shortfall ∈ {0} ∪ [ε, bound]`:
    /// `shortfall ≤ bound·z`, `shortfall ≥ ε·z`. A zero bound fixes `z = 0`.
    pub fn shortfall_indicator(
        &mut self,
        name: &str,
        shortfall: LinExpr,
        bound: f64,
        eps: f64,
    ) -> Result<Var, MilpError> {
        if bound == 0.0 {
            return Ok(self.fixed_binary(name, false));
        }
        if !(eps > 0.0) || eps >= bound || !bound.is_finite() {
            return Err(MilpError::InvalidParameter(format!(
                "{name}: need 0 < eps < bound, got eps={eps}, bound={bound}"
            )));
        }
        let z = self.binary(name);
        self.add_le(format!("{name}_up"), shortfall.clone(), z * bound)?;
        self.add_ge(format!("{name}_lo"), shortfall, z * eps)?;
        Ok(z)
    }

    /// `x = 𝟏{vsum ≤ 0}` for an integer-valued `vsum ∈ [0, vmax]`:
    /// `1 − x ≤ vsum ≤ vmax·(1 − x)`.
    pub fn leave_rule(&mut self, name: &str, vsum: LinExpr, vmax: i64) -> Result<Var, MilpError> {
        if vmax < 1 {
            return Err(MilpError::InvalidParameter(format!(
                "{name}: vacancy bound must be at least 1, got {vmax}"
            )));
        }
        let x = self.binary(name);
        self.leave_rule_on(name, vsum, vmax, x)?;
        Ok(x)
    }

    /// [`Model::leave_rule`] imposed on an existing binary `x`.
    pub fn leave_rule_on(&mut self, name: &str, vsum: LinExpr, vmax: i64, x: Var) -> Result<(), MilpError> {
        self.require_binary(x)?;
        if vmax < 1 {
            return Err(MilpError::InvalidParameter(format!(
                "{name}: vacancy bound must be at least 1, got {vmax}"
            )));
        }
        self.add_ge(format!("{name}_lo"), vsum.clone(), LinExpr::constant(1.0) - x)?;
        let vmax = vmax as f64;
        self.add_le(
            format!("{name}_up"),
            vsum,
            LinExpr::constant(vmax) - LinExpr::term(x, vmax),
        )
    }

    /// `x = 𝟏{Σ parts ≤ 0}` for integer-valued parts `v_k ∈ [0, hi_k]`:
    /// `Σ v_k ≥ 1 − x` and `v_k ≤ hi_k·(1 − x)` for each part. Tighter than
    /// one bound on the sum.
    pub fn leave_rule_split(&mut self, name: &str, parts: &[(LinExpr, f64)], x: Var) -> Result<(), MilpError> {
        self.require_binary(x)?;
        if parts.is_empty() || parts.iter().any(|(_, hi)| !(*hi >= 0.0) || !hi.is_finite()) {
            return Err(MilpError::InvalidParameter(format!(
                "{name}: parts need finite non-negative bounds"
            )));
        }
        let mut sum = LinExpr::new();
        for (k, (v, hi)) in parts.iter().enumerate() {
            sum += v.clone();
            self.add_le(format!("{name}_up{k}"), v.clone(), LinExpr::constant(*hi) - LinExpr::term(x, *hi))?;
        }
        self.add_ge(format!("{name}_lo"), sum, LinExpr::constant(1.0) - x)
    }
}
