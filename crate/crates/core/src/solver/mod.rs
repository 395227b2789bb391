//! A small dense linear-programming engine.
//!
//! [`simplex_maximize`] solves `max cᵀx` over rows `aᵀx {≤,=,≥} b` and
//! per-variable bounds with a two-phase primal simplex on a dense tableau.
//! [`add_concave_size_cuts`] linearizes the concave size reward `2x - x²`
//! with tangent cuts so the per-display layout problem stays an LP.

mod cuts;
mod simplex;

pub use cuts::{add_concave_size_cuts, tangent_envelope, ConcaveCutSet};
pub use simplex::{simplex_maximize, simplex_maximize_with, WarmSimplex};

use std::fmt::{self, Write as _};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    /// Maximized.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a variable and pads existing rows with a zero coefficient.
    pub fn add_var(&mut self, name: impl Into<String>, lo: f64, hi: f64, obj: f64) -> usize {
        self.objective.push(obj);
        self.bounds.push((lo, hi));
        self.names.push(name.into());
        for c in &mut self.constraints {
            c.coeffs.push(0.0);
        }
        self.objective.len() - 1
    }

    /// Adds a row given as sparse `(variable, coefficient)` terms.
    pub fn add_row(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn check_shape(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} is not finite")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY || lo.is_nan() || hi.is_nan()
            {
                return Err(LpError::Malformed(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn var_name(&self, j: usize) -> String {
        self.names
            .get(j)
            .filter(|s| !s.is_empty())
            .cloned()
            .unwrap_or_else(|| format!("x{j}"))
    }

    /// Plain-text dump: one line per row listing the nonzero coefficients,
    /// followed by the bounds.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let term_list = |coeffs: &[f64]| {
            let mut s = String::new();
            for (j, a) in coeffs.iter().enumerate() {
                if *a != 0.0 {
                    let _ = write!(s, " {:+.9} {}", a, self.var_name(j));
                }
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        let _ = writeln!(out, "maximize");
        let _ = writeln!(out, "  obj:{}", term_list(&self.objective));
        let _ = writeln!(out, "subject to");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(out, "  r{i}:{} {} {:.9}", term_list(&c.coeffs), c.relation, c.rhs);
        }
        let _ = writeln!(out, "bounds");
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(out, "  {} <= {} <= {}", lo, self.var_name(j), hi);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values; meaningful only when `status` is `Optimal`.
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
    pub optimality_tol: f64,
    /// Consecutive degenerate pivots tolerated under Dantzig pricing before
    /// switching to Bland's rule for the rest of the phase.
    pub degenerate_streak: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            pivot_tol: 1e-11,
            optimality_tol: 1e-9,
            degenerate_streak: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("numeric breakdown: {0}")]
    NumericBreakdown(String),
}
