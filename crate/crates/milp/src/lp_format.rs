//! Plain-text dump of a problem, loosely following the CPLEX LP layout:
//!
//! ```text
//! \ <comment>
//! Minimize
//!  obj: <coef> <var> + <coef> <var> ... + <constant>
//! Subject To
//!  <row name>: <coef> <var> ... (<= | = | >=) <rhs>
//! Bounds
//!  <lower> <= <var> <= <upper>
//! Binaries
//!  <var> ...
//! End
//! ```
//!
//! Names are sanitized to `[A-Za-z0-9_.\[\]]`. Write-only; there is no reader.

use std::fmt::Write as _;

use crate::problem::{MilpProblem, VarKind};
use crate::Scalar;

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn term<T: Scalar>(out: &mut String, first: bool, coeff: T, var: &str) {
    let v = coeff.as_f64();
    if first {
        let _ = write!(out, " {} {}", v, var);
    } else if v < 0.0 {
        let _ = write!(out, " - {} {}", -v, var);
    } else {
        let _ = write!(out, " + {} {}", v, var);
    }
}

pub fn write_lp<T: Scalar>(problem: &MilpProblem<T>, comment: &str) -> String {
    let names: Vec<String> = problem.vars().iter().map(|v| sanitize(&v.name)).collect();
    let mut out = String::new();
    for line in comment.lines() {
        let _ = writeln!(out, "\\ {line}");
    }
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in problem.objective().iter().enumerate() {
        if c != T::zero() {
            term(&mut out, first, c, &names[j]);
            first = false;
        }
    }
    let k = problem.objective_constant().as_f64();
    if first {
        let _ = write!(out, " {k}");
    } else if k != 0.0 {
        let _ = write!(out, " + {k}");
    }
    out.push_str("\nSubject To\n");
    for (i, row) in problem.constraints().iter().enumerate() {
        let label = if row.name.is_empty() {
            format!("c{i}")
        } else {
            sanitize(&row.name)
        };
        let _ = write!(out, " {label}:");
        if row.coeffs.is_empty() {
            out.push_str(" 0");
        }
        for (k, &(v, c)) in row.coeffs.iter().enumerate() {
            term(&mut out, k == 0, c, &names[v.0]);
        }
        let _ = writeln!(out, " {} {}", row.sense.symbol(), row.rhs.as_f64());
    }
    out.push_str("Bounds\n");
    for (j, v) in problem.vars().iter().enumerate() {
        if v.kind == VarKind::Binary && v.lower == T::zero() && v.upper == T::one() {
            continue;
        }
        let _ = writeln!(
            out,
            " {} <= {} <= {}",
            v.lower.as_f64(),
            names[j],
            v.upper.as_f64()
        );
    }
    let binaries: Vec<&str> = problem
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| names[j].as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
