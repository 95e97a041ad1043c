//! Fixed-form MPS and CPLEX-LP writers. Columns are named `C<n>` and rows
//! `R<n>` in model order, so output is byte-stable for a given model.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use super::{MilpModel, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Mps,
    Lp,
}

impl FromStr for ModelFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mps" => Ok(ModelFormat::Mps),
            "lp" => Ok(ModelFormat::Lp),
            other => Err(format!("unknown model format '{other}' (expected mps or lp)")),
        }
    }
}

impl ModelFormat {
    /// Guess from a file extension, defaulting to MPS.
    pub fn from_path(path: &Path) -> ModelFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("lp") => ModelFormat::Lp,
            _ => ModelFormat::Mps,
        }
    }
}

fn col_name(c: u32) -> String {
    format!("C{c}")
}

fn row_name(r: usize) -> String {
    format!("R{r}")
}

/// Column-major view of the constraint matrix, objective first.
fn columns(model: &MilpModel) -> Vec<Vec<(Option<usize>, i64)>> {
    let mut cols = vec![Vec::new(); model.num_columns()];
    for &(c, k) in &model.objective {
        if k != 0 {
            cols[c as usize].push((None, k));
        }
    }
    for (r, row) in model.constraints.iter().enumerate() {
        for &(c, k) in &row.terms {
            cols[c as usize].push((Some(r), k));
        }
    }
    cols
}

pub fn write_mps<W: Write>(model: &MilpModel, w: &mut W) -> io::Result<()> {
    let mut out = String::new();
    let n = model.num_columns();
    // names stay within 8 characters for fixed-form readers
    assert!(n < 10_000_000 && model.constraints.len() < 10_000_000, "model too large for fixed-form MPS");
    out.push_str("NAME          WIRELAYR\nROWS\n N  OBJ\n");
    for (r, row) in model.constraints.iter().enumerate() {
        let t = match row.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        };
        let _ = writeln!(out, " {t}  {}", row_name(r));
    }
    out.push_str("COLUMNS\n");
    out.push_str("    MARKER                 'MARKER'                 'INTORG'\n");
    for (c, entries) in columns(model).iter().enumerate() {
        let name = col_name(c as u32);
        if entries.is_empty() {
            // keep the column declared even if it appears nowhere
            let _ = writeln!(out, "    {name:<8}  {:<8}  {:>12}", "OBJ", 0);
        }
        for &(r, k) in entries {
            let rn = r.map(row_name).unwrap_or_else(|| "OBJ".into());
            let _ = writeln!(out, "    {name:<8}  {rn:<8}  {k:>12}");
        }
    }
    out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");
    out.push_str("RHS\n");
    for (r, row) in model.constraints.iter().enumerate() {
        if row.rhs != 0 {
            let _ = writeln!(out, "    RHS       {:<8}  {:>12}", row_name(r), row.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for c in 0..n {
        let _ = writeln!(out, " BV BND       {}", col_name(c as u32));
    }
    out.push_str("ENDATA\n");
    w.write_all(out.as_bytes())
}

fn lp_terms(out: &mut String, terms: impl Iterator<Item = (u32, i64)>) {
    let mut line_len = 0;
    let mut first = true;
    for (c, k) in terms {
        let sign = if k < 0 {
            "-"
        } else if first {
            ""
        } else {
            "+"
        };
        let mag = k.abs();
        let piece = if mag == 1 { format!(" {sign} {}", col_name(c)) } else { format!(" {sign} {mag} {}", col_name(c)) };
        if line_len + piece.len() > 200 {
            out.push_str("\n   ");
            line_len = 3;
        }
        line_len += piece.len();
        out.push_str(&piece);
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

pub fn write_lp<W: Write>(model: &MilpModel, w: &mut W) -> io::Result<()> {
    let mut out = String::from("\\ wirelayr model\nMinimize\n obj:");
    lp_terms(&mut out, model.objective.iter().copied().filter(|t| t.1 != 0));
    out.push_str("\nSubject To\n");
    for (r, row) in model.constraints.iter().enumerate() {
        let _ = write!(out, " {}:", row_name(r));
        lp_terms(&mut out, row.terms.iter().copied());
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Binary\n");
    for c in 0..model.num_columns() {
        let _ = writeln!(out, " {}", col_name(c as u32));
    }
    out.push_str("End\n");
    w.write_all(out.as_bytes())
}

pub fn export_model(model: &MilpModel, format: ModelFormat, path: &Path) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        ModelFormat::Mps => write_mps(model, &mut f)?,
        ModelFormat::Lp => write_lp(model, &mut f)?,
    }
    f.flush()
}
