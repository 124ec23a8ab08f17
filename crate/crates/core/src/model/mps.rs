//! MPS export. Column and row names follow the model's naming convention;
//! since they exceed eight characters, fields are whitespace separated as
//! free-format MPS readers expect.

use std::fmt::Write;

use super::{MilpModel, Relation, VarKind};

const OBJ: &str = "obj";

fn num(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

pub fn to_mps(model: &MilpModel, name: &str) -> String {
    let mut out = String::new();
    writeln!(out, "NAME {name}").unwrap();
    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N {OBJ}").unwrap();
    for c in &model.constraints {
        let tag = match c.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        writeln!(out, " {tag} {}", c.name).unwrap();
    }

    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.variables.len()];
    for &(v, c) in &model.objective.terms {
        columns[v].push((OBJ, c));
    }
    for con in &model.constraints {
        for &(v, c) in &con.terms {
            columns[v].push((con.name.as_str(), c));
        }
    }
    writeln!(out, "COLUMNS").unwrap();
    for var in &model.variables {
        let entries = &columns[var.id];
        if entries.is_empty() {
            writeln!(out, "    {} {OBJ} 0", var.name).unwrap();
        }
        for (row, c) in entries {
            writeln!(out, "    {} {row} {}", var.name, num(*c)).unwrap();
        }
    }

    writeln!(out, "RHS").unwrap();
    if model.objective.constant != 0.0 {
        // the objective row's RHS is the negated offset
        writeln!(out, "    RHS {OBJ} {}", num(-model.objective.constant)).unwrap();
    }
    for c in &model.constraints {
        if c.rhs != 0.0 {
            writeln!(out, "    RHS {} {}", c.name, num(c.rhs)).unwrap();
        }
    }

    writeln!(out, "BOUNDS").unwrap();
    for var in &model.variables {
        match var.kind {
            VarKind::Binary => writeln!(out, " BV BND {}", var.name).unwrap(),
            VarKind::Continuous { lb, ub } => {
                if lb != 0.0 {
                    if lb == f64::NEG_INFINITY {
                        writeln!(out, " MI BND {}", var.name).unwrap();
                    } else {
                        writeln!(out, " LO BND {} {}", var.name, num(lb)).unwrap();
                    }
                }
                if ub != f64::INFINITY {
                    writeln!(out, " UP BND {} {}", var.name, num(ub)).unwrap();
                }
            }
        }
    }
    writeln!(out, "ENDATA").unwrap();
    out
}
