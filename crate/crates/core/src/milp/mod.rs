//! Solver-agnostic mixed-integer linear model builder.
//!
//! A [`Model`] holds variables, linear constraints and a linear objective
//! (always minimised). Linearisation gadgets live in [`gadgets`], the HiGHS
//! backend in [`backend`], the brute-force reference solver in
//! [`enumerate`] and CPLEX-LP text export/import in [`lp_format`].

pub mod backend;
pub mod enumerate;
pub mod gadgets;
pub mod lp_format;

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::MilpError;

pub use backend::{complete_assignment, solve, solve_from, SolveOptions, SolveResult, SolveStatus};
pub use enumerate::{enumerate_oracle, Domains, ENUMERATION_LIMIT};

/// Handle to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarDef {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// Affine expression `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(var: Var, coef: f64) -> Self {
        Self {
            terms: vec![(var, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: Var, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
        self
    }

    pub fn sum<I: IntoIterator<Item = Var>>(vars: I) -> Self {
        Self {
            terms: vars.into_iter().map(|v| (v, 1.0)).collect(),
            constant: 0.0,
        }
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Merges duplicate variables and drops zero coefficients, keeping the
    /// order of first appearance.
    pub fn compact(mut self) -> Self {
        let mut merged: Vec<(Var, f64)> = Vec::with_capacity(self.terms.len());
        let mut slot: std::collections::HashMap<Var, usize> = std::collections::HashMap::new();
        for (v, c) in self.terms.drain(..) {
            match slot.get(&v) {
                Some(&k) => merged[k].1 += c,
                None => {
                    slot.insert(v, merged.len());
                    merged.push((v, c));
                }
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        self.terms = merged;
        self
    }

    /// Bounds `(min, max)` of the expression over the variable boxes.
    pub fn range(&self, model: &Model) -> (f64, f64) {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for (v, c) in &self.terms {
            let d = &model.vars[v.0];
            if *c >= 0.0 {
                lo += c * d.lower;
                hi += c * d.upper;
            } else {
                lo += c * d.upper;
                hi += c * d.lower;
            }
        }
        (lo, hi)
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl SubAssign<LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: LinExpr) {
        self.terms.extend(rhs.terms.into_iter().map(|(v, c)| (v, -c)));
        self.constant -= rhs.constant;
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs.into();
        self
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs.into();
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl<T: Into<LinExpr>> Add<T> for Var {
    type Output = LinExpr;
    fn add(self, rhs: T) -> LinExpr {
        LinExpr::from(self) + rhs
    }
}

impl<T: Into<LinExpr>> Sub<T> for Var {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        LinExpr::from(self) - rhs
    }
}

impl Mul<f64> for Var {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        LinExpr::term(self, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

/// `Σ coef·var  (≤ | = | ≥)  rhs`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(Var, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    /// Amount by which `values` violates the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs: f64 = self.terms.iter().map(|(v, c)| c * values[v.0]).sum();
        match self.cmp {
            Cmp::Le => (lhs - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - lhs).max(0.0),
            Cmp::Eq => (lhs - self.rhs).abs(),
        }
    }

    fn scale(&self, values: &[f64]) -> f64 {
        let mag: f64 = self
            .terms
            .iter()
            .map(|(v, c)| (c * values[v.0]).abs())
            .fold(0.0, f64::max);
        1.0_f64.max(self.rhs.abs()).max(mag)
    }
}

/// A minimisation MILP.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    vars: Vec<VarDef>,
    constraints: Vec<Constraint>,
    objective: LinExpr,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> Var {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.vars.push(VarDef {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        Var(self.vars.len() - 1)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Var {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Var {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn integer(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Var {
        self.add_var(name, VarKind::Integer, lower, upper)
    }

    /// Binary variable fixed at `value`.
    pub fn fixed_binary(&mut self, name: impl Into<String>, value: bool) -> Var {
        let v = if value { 1.0 } else { 0.0 };
        self.add_var(name, VarKind::Binary, v, v)
    }

    pub fn fix(&mut self, var: Var, value: f64) {
        let d = &mut self.vars[var.0];
        d.lower = value;
        d.upper = value;
    }

    pub fn set_bounds(&mut self, var: Var, lower: f64, upper: f64) {
        let d = &mut self.vars[var.0];
        d.lower = lower;
        d.upper = upper;
    }

    pub fn var(&self, var: Var) -> &VarDef {
        &self.vars[var.0]
    }

    pub fn vars(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn var_handles(&self) -> impl Iterator<Item = Var> {
        (0..self.vars.len()).map(Var)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn set_kind(&mut self, var: Var, kind: VarKind) {
        self.vars[var.0].kind = kind;
    }

    /// Copy with every integrality requirement dropped.
    pub fn relaxed(&self) -> Model {
        let mut m = self.clone();
        for d in &mut m.vars {
            d.kind = VarKind::Continuous;
        }
        m
    }

    pub fn num_integral(&self) -> usize {
        self.vars.iter().filter(|d| d.kind.is_integral()).count()
    }

    fn check_vars(&self, expr: &LinExpr) -> Result<(), MilpError> {
        match expr.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            Some((v, _)) => Err(MilpError::UnknownVariable(v.0)),
            None => Ok(()),
        }
    }

    /// Adds `lhs cmp rhs`; constants on either side are folded into the
    /// right-hand side.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        lhs: impl Into<LinExpr>,
        cmp: Cmp,
        rhs: impl Into<LinExpr>,
    ) -> Result<(), MilpError> {
        let expr = (lhs.into() - rhs.into()).compact();
        self.check_vars(&expr)?;
        self.constraints.push(Constraint {
            name: name.into(),
            terms: expr.terms,
            cmp,
            rhs: -expr.constant,
        });
        Ok(())
    }

    pub fn add_le(&mut self, name: impl Into<String>, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) -> Result<(), MilpError> {
        self.add_constraint(name, lhs, Cmp::Le, rhs)
    }

    pub fn add_ge(&mut self, name: impl Into<String>, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) -> Result<(), MilpError> {
        self.add_constraint(name, lhs, Cmp::Ge, rhs)
    }

    pub fn add_eq(&mut self, name: impl Into<String>, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) -> Result<(), MilpError> {
        self.add_constraint(name, lhs, Cmp::Eq, rhs)
    }

    pub fn add_objective(&mut self, expr: impl Into<LinExpr>) -> Result<(), MilpError> {
        let expr = expr.into();
        self.check_vars(&expr)?;
        self.objective += expr;
        Ok(())
    }

    pub fn set_objective(&mut self, expr: impl Into<LinExpr>) -> Result<(), MilpError> {
        self.objective = LinExpr::new();
        self.add_objective(expr)
    }

    /// Objective with duplicate terms merged.
    pub fn compact_objective(&self) -> LinExpr {
        self.objective.clone().compact()
    }

    /// Lists bound, integrality and constraint violations larger than `tol`
    /// (relative to the magnitude of each row).
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if values.len() != self.vars.len() {
            out.push(format!(
                "assignment has {} values for {} variables",
                values.len(),
                self.vars.len()
            ));
            return out;
        }
        for (d, &x) in self.vars.iter().zip(values) {
            if x < d.lower - tol || x > d.upper + tol {
                out.push(format!("{} = {} outside [{}, {}]", d.name, x, d.lower, d.upper));
            }
            if d.kind.is_integral() && (x - x.round()).abs() > tol {
                out.push(format!("{} = {} is not integral", d.name, x));
            }
        }
        for c in &self.constraints {
            let viol = c.violation(values);
            if viol > tol * c.scale(values) {
                out.push(format!("constraint {} violated by {}", c.name, viol));
            }
        }
        out
    }

    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        self.violations(values, tol).is_empty()
    }
}
