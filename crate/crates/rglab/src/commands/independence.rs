use std::fmt::Write as _;

use nalgebra::Matrix3;
use serde_json::{json, Value};

use rglab_core::asymptotics::{
    asymptotically_independent, char_poly_roots, gaussian_condition, independence_lhs, isserlis_pair_moments,
    QuadraticCondition, PSD_TOLERANCE,
};

use crate::error::CliError;

/// Analysis of one `(rho1, rho2[, rho_x1x2])` query.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub rho1: f64,
    pub rho2: f64,
    pub condition: QuadraticCondition,
    pub real_roots: Vec<f64>,
    pub admissible_roots: Vec<f64>,
    pub pair: Option<PairCheck>,
}

/// Extra results when the feature-feature correlation is given.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub rho_x1x2: f64,
    pub min_eigenvalue: f64,
    pub valid_structure: bool,
    /// `None` when the implied matrix is not a valid correlation matrix.
    pub lhs: Option<f64>,
    pub independent: Option<bool>,
    pub quadratic_value: f64,
}

fn check_input(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_nan() || v.abs() >= 1.0 {
        return Err(CliError::Config(format!("{name} = {v} is outside (-1, 1)")));
    }
    Ok(())
}

pub fn check_independence(rho1: f64, rho2: f64, rho_x1x2: Option<f64>) -> Result<IndependenceReport, CliError> {
    check_input("rho1", rho1)?;
    check_input("rho2", rho2)?;
    if let Some(c) = rho_x1x2 {
        check_input("rho_x1x2", c)?;
    }
    let condition = gaussian_condition(rho1, rho2).map_err(CliError::config)?;
    let pair = match rho_x1x2 {
        None => None,
        Some(c) => {
            let roots = char_poly_roots(rho1, rho2, c).map_err(CliError::config)?;
            let min_eigenvalue = roots.roots.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            let valid_structure = min_eigenvalue >= PSD_TOLERANCE;
            let moments = if valid_structure {
                let sigma = Matrix3::new(1.0, c, rho1, c, 1.0, rho2, rho1, rho2, 1.0);
                Some(isserlis_pair_moments(&sigma).map_err(CliError::runtime)?)
            } else {
                None
            };
            Some(PairCheck {
                rho_x1x2: c,
                min_eigenvalue,
                valid_structure,
                lhs: moments.as_ref().map(independence_lhs),
                independent: moments.as_ref().map(asymptotically_independent),
                quadratic_value: condition.evaluate(c),
            })
        }
    };
    Ok(IndependenceReport {
        rho1,
        rho2,
        real_roots: condition.real_roots(),
        admissible_roots: condition.admissible_roots(),
        condition,
        pair,
    })
}

/// Twelve significant digits, without trailing zeros or a negative zero.
fn short(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    if rounded == 0.0 {
        "0".into()
    } else {
        format!("{rounded}")
    }
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|&x| short(x)).collect::<Vec<_>>().join(", ")
}

impl IndependenceReport {
    pub fn to_text(&self) -> String {
        let q = &self.condition;
        let mut s = String::new();
        let _ = writeln!(s, "rho1 = {}, rho2 = {}", short(self.rho1), short(self.rho2));
        let _ = writeln!(
            s,
            "quadratic in rho_x1x2: a = {}, b = {}, c = {}",
            short(q.a),
            short(q.b),
            short(q.c)
        );
        if q.a == 0.0 {
            let _ = writeln!(s, "linear condition (a = 0), discriminant = {}", short(q.discriminant));
            if self.real_roots.len() == 1 && self.real_roots[0] == 0.0 {
                let _ = writeln!(
                    s,
                    "unique root 0: a feature uncorrelated with the target forces uncorrelated features"
                );
            } else {
                let _ = writeln!(s, "unique root {}", list(&self.real_roots));
            }
        } else if self.real_roots.is_empty() {
            let _ = writeln!(
                s,
                "discriminant = {}, no real solution: asymptotic independence impossible",
                short(q.discriminant)
            );
        } else {
            let _ = writeln!(s, "discriminant = {}", short(q.discriminant));
            let _ = writeln!(s, "real roots: {}", list(&self.real_roots));
        }
        if q.a != 0.0 && !self.real_roots.is_empty() {
            if self.admissible_roots.is_empty() {
                let _ = writeln!(s, "no root inside (-1, 1): asymptotic independence impossible");
            } else {
                let _ = writeln!(s, "inside (-1, 1): {}", list(&self.admissible_roots));
            }
        }
        if let Some(p) = &self.pair {
            let _ = writeln!(s, "rho_x1x2 = {}", short(p.rho_x1x2));
            let validity = if p.valid_structure { "valid correlation structure" } else { "not a valid correlation structure" };
            let _ = writeln!(s, "min eigenvalue = {} ({validity})", short(p.min_eigenvalue));
            let _ = writeln!(s, "quadratic at rho_x1x2 = {}", short(p.quadratic_value));
            match (p.lhs, p.independent) {
                (Some(lhs), Some(ind)) => {
                    let verdict = if ind { "asymptotically independent" } else { "not asymptotically independent" };
                    let _ = writeln!(s, "independence LHS = {} ({verdict})", short(lhs));
                }
                _ => {
                    let _ = writeln!(s, "independence LHS not evaluated: no Gaussian law has this correlation matrix");
                }
            }
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let q = &self.condition;
        let mut v = json!({
            "rho1": self.rho1,
            "rho2": self.rho2,
            "a": q.a,
            "b": q.b,
            "c": q.c,
            "discriminant": q.discriminant,
            "real_roots": self.real_roots,
            "admissible_roots": self.admissible_roots,
            "solvable": !self.admissible_roots.is_empty(),
        });
        if let Some(p) = &self.pair {
            let obj = v.as_object_mut().expect("object");
            obj.insert("rho_x1x2".into(), json!(p.rho_x1x2));
            obj.insert("min_eigenvalue".into(), json!(p.min_eigenvalue));
            obj.insert("valid_structure".into(), json!(p.valid_structure));
            obj.insert("lhs".into(), json!(p.lhs));
            obj.insert("independent".into(), json!(p.independent));
            obj.insert("quadratic_value".into(), json!(p.quadratic_value));
        }
        v
    }
}
