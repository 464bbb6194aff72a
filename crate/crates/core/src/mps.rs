//! Free-format MPS reader and writer.
//!
//! Supported sections: NAME, ROWS, COLUMNS (with INTORG/INTEND markers),
//! RHS, BOUNDS, ENDATA. `L` rows are negated into `>=` form and each `E` row
//! becomes a pair of `>=` rows, the second named `<name>.neg`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::ParseError;
use crate::lp::LpModel;
use crate::model::MipProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowKind {
    Objective,
    Free,
    Ge,
    Le,
    Eq,
}

struct RowDecl {
    name: String,
    kind: RowKind,
}

fn number(tok: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = tok.parse().map_err(|_| ParseError::Syntax {
        line,
        msg: format!("expected a number, found `{tok}`"),
    })?;
    if v.is_nan() {
        return Err(ParseError::Syntax {
            line,
            msg: "NaN is not a valid coefficient".into(),
        });
    }
    Ok(v)
}

/// Parse free-format MPS text.
pub fn parse_mps(text: &str) -> Result<MipProblem, ParseError> {
    let mut section = Section::None;
    let mut name = String::new();
    let mut rows: Vec<RowDecl> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut cols: Vec<String> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut integer: Vec<bool> = Vec::new();
    // sparse entries (row, col, value)
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs: HashMap<usize, f64> = HashMap::new();
    let mut lower: Vec<Option<f64>> = Vec::new();
    let mut upper: Vec<Option<f64>> = Vec::new();
    let mut in_int = false;
    let mut ended = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim_end();
        if trimmed.trim().is_empty() || trimmed.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        if header {
            match toks[0] {
                "NAME" => {
                    name = toks.get(1..).map(|t| t.join(" ")).unwrap_or_default();
                    section = Section::None;
                }
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "BOUNDS" => section = Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => {
                    return Err(ParseError::UnknownSection {
                        line,
                        name: other.to_string(),
                    })
                }
            }
            continue;
        }
        match section {
            Section::None => {
                return Err(ParseError::Syntax {
                    line,
                    msg: "data line outside of a section".into(),
                })
            }
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(ParseError::Syntax {
                        line,
                        msg: "ROWS entries need a type and a name".into(),
                    });
                }
                let has_objective = rows.iter().any(|r| r.kind == RowKind::Objective);
                let kind = match toks[0] {
                    "N" if !has_objective => RowKind::Objective,
                    "N" => RowKind::Free,
                    "G" => RowKind::Ge,
                    "L" => RowKind::Le,
                    "E" => RowKind::Eq,
                    t => {
                        return Err(ParseError::Syntax {
                            line,
                            msg: format!("unknown row type `{t}`"),
                        })
                    }
                };
                let rname = toks[1].to_string();
                if row_index.contains_key(&rname) {
                    return Err(ParseError::DuplicateRow { line, name: rname });
                }
                row_index.insert(rname.clone(), rows.len());
                rows.push(RowDecl { name: rname, kind });
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        m => {
                            return Err(ParseError::Syntax {
                                line,
                                msg: format!("unknown marker {m}"),
                            })
                        }
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(ParseError::Syntax {
                        line,
                        msg: "COLUMNS entries need a column and one or two (row, value) pairs"
                            .into(),
                    });
                }
                let cname = toks[0];
                let c = match col_index.get(cname) {
                    Some(&c) => c,
                    None => {
                        col_index.insert(cname.to_string(), cols.len());
                        cols.push(cname.to_string());
                        integer.push(in_int);
                        lower.push(None);
                        upper.push(None);
                        cols.len() - 1
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let r = *row_index
                        .get(pair[0])
                        .ok_or_else(|| ParseError::UnknownRow {
                            line,
                            name: pair[0].to_string(),
                        })?;
                    entries.push((r, c, number(pair[1], line)?));
                }
            }
            Section::Rhs => {
                let body = if toks.len() % 2 == 1 {
                    &toks[1..]
                } else {
                    &toks[..]
                };
                if body.is_empty() {
                    return Err(ParseError::Syntax {
                        line,
                        msg: "RHS entry without values".into(),
                    });
                }
                for pair in body.chunks(2) {
                    let r = *row_index
                        .get(pair[0])
                        .ok_or_else(|| ParseError::UnknownRow {
                            line,
                            name: pair[0].to_string(),
                        })?;
                    rhs.insert(r, number(pair[1], line)?);
                }
            }
            Section::Bounds => {
                let kind = toks[0];
                let needs_value = !matches!(kind, "FR" | "MI" | "PL" | "BV");
                // optional bound-set name
                let expected_with_set = if needs_value { 4 } else { 3 };
                let rest = if toks.len() == expected_with_set {
                    &toks[2..]
                } else if toks.len() == expected_with_set - 1 {
                    &toks[1..]
                } else if kind == "BV" && toks.len() == 4 {
                    &toks[2..3]
                } else {
                    return Err(ParseError::Syntax {
                        line,
                        msg: format!("malformed {kind} bound"),
                    });
                };
                let cname = rest[0];
                let c = *col_index
                    .get(cname)
                    .ok_or_else(|| ParseError::UnknownColumn {
                        line,
                        name: cname.to_string(),
                    })?;
                let value = if needs_value {
                    Some(number(rest[1], line)?)
                } else {
                    None
                };
                match (kind, value) {
                    ("UP", Some(v)) => {
                        if v < 0.0 && lower[c].is_none() {
                            lower[c] = Some(f64::NEG_INFINITY);
                        }
                        upper[c] = Some(v);
                    }
                    ("LO", Some(v)) => lower[c] = Some(v),
                    ("FX", Some(v)) => {
                        lower[c] = Some(v);
                        upper[c] = Some(v);
                    }
                    ("LI", Some(v)) => {
                        lower[c] = Some(v);
                        integer[c] = true;
                    }
                    ("UI", Some(v)) => {
                        upper[c] = Some(v);
                        integer[c] = true;
                    }
                    ("FR", None) => {
                        lower[c] = Some(f64::NEG_INFINITY);
                        upper[c] = Some(f64::INFINITY);
                    }
                    ("MI", None) => lower[c] = Some(f64::NEG_INFINITY),
                    ("PL", None) => upper[c] = Some(f64::INFINITY),
                    ("BV", None) => {
                        lower[c] = Some(0.0);
                        upper[c] = Some(1.0);
                        integer[c] = true;
                    }
                    _ => {
                        return Err(ParseError::Syntax {
                            line,
                            msg: format!("unknown bound type `{kind}`"),
                        })
                    }
                }
            }
        }
    }
    if !ended {
        return Err(ParseError::Syntax {
            line: text.lines().count(),
            msg: "missing ENDATA".into(),
        });
    }
    let obj_row = rows
        .iter()
        .position(|r| r.kind == RowKind::Objective)
        .ok_or(ParseError::NoObjective)?;
    let n = cols.len();
    let mut dense: Vec<Vec<f64>> = vec![vec![0.0; n]; rows.len()];
    for (r, c, v) in entries {
        dense[r][c] += v;
    }
    let objective = dense[obj_row].clone();
    let objective_offset = -rhs.get(&obj_row).copied().unwrap_or(0.0);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut row_names = Vec::new();
    for (r, decl) in rows.iter().enumerate() {
        let rv = rhs.get(&r).copied().unwrap_or(0.0);
        match decl.kind {
            RowKind::Objective | RowKind::Free => {}
            RowKind::Ge => {
                a.push(dense[r].clone());
                b.push(rv);
                row_names.push(decl.name.clone());
            }
            RowKind::Le => {
                a.push(dense[r].iter().map(|v| -v).collect());
                b.push(-rv);
                row_names.push(decl.name.clone());
            }
            RowKind::Eq => {
                a.push(dense[r].clone());
                b.push(rv);
                row_names.push(decl.name.clone());
                a.push(dense[r].iter().map(|v| -v).collect());
                b.push(-rv);
                row_names.push(format!("{}.neg", decl.name));
            }
        }
    }
    let lo: Vec<f64> = lower.iter().map(|v| v.unwrap_or(0.0)).collect();
    let hi: Vec<f64> = upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
    let lp = LpModel::new(objective, a, b, lo, hi)?;
    Ok(MipProblem::with_names(
        name,
        lp,
        integer,
        cols,
        row_names,
        rows[obj_row].name.clone(),
        objective_offset,
    )?)
}

/// Serialize a problem as free-format MPS. All rows are written as `G` rows.
pub fn write_mps(problem: &MipProblem) -> String {
    let lp = &problem.lp;
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", problem.name);
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {}", problem.objective_name);
    for r in &problem.row_names {
        let _ = writeln!(out, " G {r}");
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for k in 0..lp.num_cols() {
        if problem.integer[k] != in_int {
            let tag = if problem.integer[k] {
                "'INTORG'"
            } else {
                "'INTEND'"
            };
            let _ = writeln!(out, " MARKER 'MARKER' {tag}");
            in_int = problem.integer[k];
        }
        let name = &problem.col_names[k];
        // always emit the objective entry so the column is declared
        let _ = writeln!(
            out,
            " {} {} {}",
            name,
            problem.objective_name,
            lp.objective()[k]
        );
        for i in 0..lp.num_rows() {
            let v = lp.row(i)[k];
            if v != 0.0 {
                let _ = writeln!(out, " {} {} {}", name, problem.row_names[i], v);
            }
        }
    }
    if in_int {
        out.push_str(" MARKER 'MARKER' 'INTEND'\n");
    }
    out.push_str("RHS\n");
    if problem.objective_offset != 0.0 {
        let _ = writeln!(
            out,
            " RHS {} {}",
            problem.objective_name, -problem.objective_offset
        );
    }
    for i in 0..lp.num_rows() {
        if lp.rhs()[i] != 0.0 {
            let _ = writeln!(out, " RHS {} {}", problem.row_names[i], lp.rhs()[i]);
        }
    }
    out.push_str("BOUNDS\n");
    for k in 0..lp.num_cols() {
        let name = &problem.col_names[k];
        let (lo, hi) = (lp.lower()[k], lp.upper()[k]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " FR BND {name}");
            continue;
        }
        if lo == hi {
            let _ = writeln!(out, " FX BND {name} {lo}");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND {name}");
        } else if lo != 0.0 {
            let _ = writeln!(out, " LO BND {name} {lo}");
        }
        if hi.is_finite() {
            let _ = writeln!(out, " UP BND {name} {hi}");
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const KNAPSACK: &str = "\
NAME knap
ROWS
 N cost
 L cap
COLUMNS
 MARKER 'MARKER' 'INTORG'
 a cost -5 cap 3
 b cost -4 cap 2
 MARKER 'MARKER' 'INTEND'
RHS
 RHS cap 7.5
BOUNDS
 UP BND a 2.5
 UP BND b 3
ENDATA
";

    #[test]
    fn knapsack() {
        let p = parse_mps(KNAPSACK).unwrap();
        assert_eq!(p.integer_columns().count(), 2);
        assert_eq!(p.lp.row(0), &[-3.0, -2.0]);
        assert_eq!(p.lp.rhs(), &[-7.5]);
        assert_eq!(p.lp.upper(), &[2.0, 3.0]);
        assert_eq!(p.col_names, vec!["a", "b"]);
    }

    #[test]
    fn default_bounds() {
        let text = "NAME t\nROWS\n N obj\n G r\nCOLUMNS\n x obj 1 r 1\nRHS\n RHS r 1\nENDATA\n";
        let p = parse_mps(text).unwrap();
        assert_eq!(p.lp.lower(), &[0.0]);
        assert_eq!(p.lp.upper(), &[f64::INFINITY]);
    }

    #[test]
    fn unknown_row_named() {
        let text = "NAME t\nROWS\n N obj\nCOLUMNS\n x obj 1 nope 2\nENDATA\n";
        match parse_mps(text) {
            Err(ParseError::UnknownRow { line: 5, name }) => assert_eq!(name, "nope"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_row_and_unknown_section() {
        let dup = "NAME t\nROWS\n N obj\n G r\n L r\nENDATA\n";
        assert!(matches!(
            parse_mps(dup),
            Err(ParseError::DuplicateRow { line: 5, .. })
        ));
        let sec = "NAME t\nROWS\n N obj\nRANGES\nENDATA\n";
        assert!(matches!(
            parse_mps(sec),
            Err(ParseError::UnknownSection { line: 4, .. })
        ));
    }

    #[test]
    fn bound_on_unknown_column() {
        let text = "NAME t\nROWS\n N obj\nCOLUMNS\n x obj 1\nBOUNDS\n UP BND y 4\nENDATA\n";
        assert!(matches!(
            parse_mps(text),
            Err(ParseError::UnknownColumn { line: 7, .. })
        ));
    }

    #[test]
    fn equality_rows_split() {
        let text = "NAME t\nROWS\n N obj\n E e\nCOLUMNS\n x obj 1 e 2\nRHS\n RHS e 4\nENDATA\n";
        let p = parse_mps(text).unwrap();
        assert_eq!(p.lp.num_rows(), 2);
        assert_eq!(p.row_names, vec!["e", "e.neg"]);
        assert_eq!(p.lp.rhs(), &[4.0, -4.0]);
    }

    #[test]
    fn round_trip() {
        let p = parse_mps(KNAPSACK).unwrap();
        let q = parse_mps(&write_mps(&p)).unwrap();
        assert_eq!(p, q);
    }
}
