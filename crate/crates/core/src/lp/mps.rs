//! Free-format MPS export and import for [`LinearProgram`].
//!
//! Only the subset the solver understands is supported: one objective row,
//! `E`/`L`/`G` constraint rows, a single right-hand-side vector and `FR`
//! (free) or `PL` (nonnegative) bounds. Rows are named `R1..Rm` and columns
//! `C1..Cn` on export; any names are accepted on import.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{LinearProgram, RowKind, Sense, VarKind};
use crate::error::{Error, Result};

const OBJ_ROW: &str = "OBJ";

pub fn write_mps<W: Write>(lp: &LinearProgram, mut w: W) -> Result<()> {
    lp.validate()?;
    let name = if lp.name.trim().is_empty() { "LP" } else { lp.name.trim() };
    writeln!(w, "NAME {}", name.replace(char::is_whitespace, "_"))?;
    if lp.sense == Sense::Maximize {
        writeln!(w, "OBJSENSE")?;
        writeln!(w, "    MAX")?;
    }
    writeln!(w, "ROWS")?;
    writeln!(w, " N  {OBJ_ROW}")?;
    for (i, kind) in lp.row_kinds.iter().enumerate() {
        let tag = match kind {
            RowKind::Eq => 'E',
            RowKind::Le => 'L',
            RowKind::Ge => 'G',
        };
        writeln!(w, " {tag}  R{}", i + 1)?;
    }
    writeln!(w, "COLUMNS")?;
    for (j, col) in lp.columns.iter().enumerate() {
        writeln!(w, "    C{}  {OBJ_ROW}  {}", j + 1, lp.objective[j])?;
        for &(i, v) in col {
            writeln!(w, "    C{}  R{}  {}", j + 1, i + 1, v)?;
        }
    }
    writeln!(w, "RHS")?;
    for (i, &b) in lp.rhs.iter().enumerate() {
        if b != 0.0 {
            writeln!(w, "    RHS  R{}  {}", i + 1, b)?;
        }
    }
    if lp.var_kinds.contains(&VarKind::Free) {
        writeln!(w, "BOUNDS")?;
        for (j, kind) in lp.var_kinds.iter().enumerate() {
            if *kind == VarKind::Free {
                writeln!(w, " FR BND  C{}", j + 1)?;
            }
        }
    }
    writeln!(w, "ENDATA")?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Head,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| parse_err(line, format!("bad number '{tok}'")))
}

pub fn read_mps<R: BufRead>(reader: R) -> Result<LinearProgram> {
    let mut name = String::new();
    let mut sense = Sense::Minimize;
    let mut section = Section::Head;
    let mut obj_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut row_kinds = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut objective = Vec::new();
    let mut var_kinds = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();

    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let ln = k + 1;
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !line.starts_with(char::is_whitespace) {
            section = match toks[0] {
                "NAME" => {
                    name = toks.get(1).copied().unwrap_or("").to_string();
                    Section::Head
                }
                "OBJSENSE" => match toks.get(1) {
                    Some(s) => {
                        sense = parse_sense(s, ln)?;
                        Section::Head
                    }
                    None => Section::ObjSense,
                },
                "ROWS" => Section::Rows,
                "COLUMNS" => {
                    rhs = vec![0.0; row_kinds.len()];
                    Section::Columns
                }
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                other => return Err(parse_err(ln, format!("unsupported section '{other}'"))),
            };
            if section == Section::Done {
                break;
            }
            continue;
        }
        match section {
            Section::Head | Section::Done => return Err(parse_err(ln, "data outside a section")),
            Section::ObjSense => {
                sense = parse_sense(toks[0], ln)?;
                section = Section::Head;
            }
            Section::Rows => {
                let [tag, row] = toks[..] else {
                    return Err(parse_err(ln, "expected '<type> <row>'"));
                };
                let kind = match tag {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(parse_err(ln, "more than one objective row"));
                        }
                        obj_row = Some(row.to_string());
                        continue;
                    }
                    "E" => RowKind::Eq,
                    "L" => RowKind::Le,
                    "G" => RowKind::Ge,
                    _ => return Err(parse_err(ln, format!("unknown row type '{tag}'"))),
                };
                if row_index.insert(row.to_string(), row_kinds.len()).is_some() {
                    return Err(parse_err(ln, format!("duplicate row '{row}'")));
                }
                row_kinds.push(kind);
            }
            Section::Columns => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(parse_err(ln, "expected '<col> <row> <value> [<row> <value>]'"));
                }
                let j = *col_index.entry(toks[0].to_string()).or_insert_with(|| {
                    columns.push(Vec::new());
                    objective.push(0.0);
                    var_kinds.push(VarKind::NonNegative);
                    columns.len() - 1
                });
                for pair in toks[1..].chunks(2) {
                    let v = number(pair[1], ln)?;
                    if obj_row.as_deref() == Some(pair[0]) {
                        objective[j] = v;
                    } else {
                        let i = *row_index
                            .get(pair[0])
                            .ok_or_else(|| parse_err(ln, format!("unknown row '{}'", pair[0])))?;
                        columns[j].push((i, v));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(parse_err(ln, "expected '<set> <row> <value> [<row> <value>]'"));
                }
                for pair in toks[1..].chunks(2) {
                    let v = number(pair[1], ln)?;
                    if obj_row.as_deref() == Some(pair[0]) {
                        continue;
                    }
                    let i =
                        *row_index.get(pair[0]).ok_or_else(|| parse_err(ln, format!("unknown row '{}'", pair[0])))?;
                    rhs[i] = v;
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(parse_err(ln, "expected '<type> <set> <col>'"));
                }
                let j =
                    *col_index.get(toks[2]).ok_or_else(|| parse_err(ln, format!("unknown column '{}'", toks[2])))?;
                match toks[0] {
                    "FR" => var_kinds[j] = VarKind::Free,
                    "PL" => var_kinds[j] = VarKind::NonNegative,
                    "LO" if toks.get(3).map(|t| number(t, ln)).transpose()? == Some(0.0) => {
                        var_kinds[j] = VarKind::NonNegative
                    }
                    other => return Err(parse_err(ln, format!("unsupported bound '{other}'"))),
                }
            }
        }
    }
    if section != Section::Done {
        return Err(parse_err(0, "missing ENDATA"));
    }
    if rhs.len() != row_kinds.len() {
        rhs = vec![0.0; row_kinds.len()];
    }
    let lp = LinearProgram { name, sense, objective, columns, row_kinds, rhs, var_kinds };
    lp.validate()?;
    Ok(lp)
}

fn parse_sense(tok: &str, line: usize) -> Result<Sense> {
    match tok {
        "MIN" | "MINIMIZE" => Ok(Sense::Minimize),
        "MAX" | "MAXIMIZE" => Ok(Sense::Maximize),
        _ => Err(parse_err(line, format!("unknown objective sense '{tok}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LinearProgram {
        LinearProgram {
            name: "small".into(),
            sense: Sense::Maximize,
            objective: vec![3.0, 5.0, 0.1],
            columns: vec![vec![(0, 1.0), (2, 3.0)], vec![(1, 2.0), (2, 2.0)], vec![]],
            row_kinds: vec![RowKind::Le, RowKind::Ge, RowKind::Eq],
            rhs: vec![4.0, -12.0, 18.0],
            var_kinds: vec![VarKind::NonNegative, VarKind::Free, VarKind::NonNegative],
        }
    }

    #[test]
    fn round_trip() {
        let lp = sample();
        let mut buf = Vec::new();
        write_mps(&lp, &mut buf).unwrap();
        let back = read_mps(buf.as_slice()).unwrap();
        assert_eq!(back, lp);
    }

    #[test]
    fn reads_inline_objsense_and_comments() {
        let text = "NAME t\nOBJSENSE MAX\n* comment\nROWS\n N cost\n L c1\nCOLUMNS\n    x cost 1 c1 1\nRHS\n    B c1 2\nENDATA\n";
        let lp = read_mps(text.as_bytes()).unwrap();
        assert_eq!(lp.sense, Sense::Maximize);
        assert_eq!(lp.columns, vec![vec![(0, 1.0)]]);
        assert_eq!(lp.rhs, vec![2.0]);
    }

    #[test]
    fn unknown_row_is_a_parse_error() {
        let text = "NAME t\nROWS\n N obj\nCOLUMNS\n    x nope 1\nENDATA\n";
        assert!(matches!(read_mps(text.as_bytes()), Err(Error::Parse { line: 5, .. })));
    }
}
