//! Text formats: `%dims`-headed COO tensors, dense matrices and trace CSV.
//!
//! Tensor files hold a `%dims J K L` header followed by `j k l value` lines
//! with 0-based indices. Matrix files hold `%dims J M` followed by `J` rows of
//! `M` values. Blank lines and lines starting with `#` are ignored. Reals are
//! written with 17 significant digits so that every value reads back exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{CoupledModel, Factor};
use crate::solvers::{Counters, IterTrace};
use crate::tensor::SparseTensor3;

/// Header of the trace CSV.
pub const TRACE_HEADER: &str = "iter,objective,nrv,wall_seconds,element_updates,gradient_updates,\
mttkrp_seconds,update_seconds,\
element_updates_u1,element_updates_v,element_updates_w,element_updates_u2,\
gradient_updates_u1,gradient_updates_v,gradient_updates_w,gradient_updates_u2";

/// 17-significant-digit rendering used by every writer.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Content lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_dims(path: &Path, lineno: usize, line: &str, count: usize) -> Result<Vec<usize>> {
    let rest = line
        .strip_prefix("%dims")
        .ok_or_else(|| parse_err(path, lineno, "expected a `%dims` header"))?;
    let dims: Vec<usize> = rest
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, lineno, format!("bad dimension: {e}")))?;
    if dims.len() != count || dims.contains(&0) {
        return Err(parse_err(
            path,
            lineno,
            format!("`%dims` needs {count} positive lengths, got {rest:?}"),
        ));
    }
    Ok(dims)
}

/// Parses tensor text; `path` is used only in error messages.
pub fn parse_tensor(text: &str, path: &Path) -> Result<SparseTensor3> {
    let mut lines = content_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing `%dims` header"))?;
    let d = parse_dims(path, hl, header, 3)?;
    let dims = (d[0], d[1], d[2]);
    let mut seen: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut entries = Vec::new();
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(path, lineno, format!("expected `j k l value`, got {line:?}")));
        }
        let idx = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| parse_err(path, lineno, format!("bad index {t:?}: {e}")))
        };
        let (j, k, l) = (idx(toks[0])?, idx(toks[1])?, idx(toks[2])?);
        let v: f64 = toks[3]
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad value {:?}: {e}", toks[3])))?;
        if !v.is_finite() {
            return Err(parse_err(path, lineno, format!("non-finite value {v}")));
        }
        if j >= dims.0 || k >= dims.1 || l >= dims.2 {
            return Err(parse_err(
                path,
                lineno,
                format!("index ({j}, {k}, {l}) outside dims {dims:?}"),
            ));
        }
        if let Some(first) = seen.insert((j, k, l), lineno) {
            return Err(parse_err(
                path,
                lineno,
                format!("duplicate entry ({j}, {k}, {l}), first seen at line {first}"),
            ));
        }
        entries.push((j, k, l, v));
    }
    SparseTensor3::new(dims, entries)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<SparseTensor3> {
    let path = path.as_ref();
    parse_tensor(&fs::read_to_string(path)?, path)
}

pub fn format_tensor(x: &SparseTensor3) -> String {
    let (j, k, l) = x.dims();
    let mut out = format!("%dims {j} {k} {l}\n");
    for (a, b, c, v) in x.entries() {
        let _ = writeln!(out, "{a} {b} {c} {}", fmt_real(v));
    }
    out
}

pub fn save_tensor(x: &SparseTensor3, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_tensor(x))?;
    Ok(())
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Matrix> {
    let mut lines = content_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing `%dims` header"))?;
    let d = parse_dims(path, hl, header, 2)?;
    let (rows, cols) = (d[0], d[1]);
    let mut data = Vec::with_capacity(rows * cols);
    let mut row = 0;
    for (lineno, line) in lines {
        if row == rows {
            return Err(parse_err(path, lineno, format!("more than {rows} rows")));
        }
        let before = data.len();
        for t in line.split_whitespace() {
            let v: f64 = t
                .parse()
                .map_err(|e| parse_err(path, lineno, format!("row {row}: bad value {t:?}: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("row {row}: non-finite value")));
            }
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(parse_err(
                path,
                lineno,
                format!("row {row} has {} values, expected {cols}", data.len() - before),
            ));
        }
        row += 1;
    }
    if row != rows {
        return Err(parse_err(
            path,
            text.lines().count().max(1),
            format!("expected {rows} rows, found {row}"),
        ));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    parse_matrix(&fs::read_to_string(path)?, path)
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("%dims {} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_real(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

/// Writes `u1.txt`, `v.txt`, `w.txt` and `u2.txt` into `dir`.
pub fn save_model(m: &CoupledModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for f in Factor::ALL {
        save_matrix(m.factor(f), dir.join(format!("{}.txt", f.name())))?;
    }
    Ok(())
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<CoupledModel> {
    let dir = dir.as_ref();
    let load = |f: Factor| load_matrix(dir.join(format!("{}.txt", f.name())));
    CoupledModel::new(load(Factor::U1)?, load(Factor::V)?, load(Factor::W)?, load(Factor::U2)?)
}

pub fn format_trace(traces: &[IterTrace]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for t in traces {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.iter,
            fmt_real(t.objective),
            fmt_real(t.nrv),
            fmt_real(t.wall_seconds),
            t.element_updates,
            t.gradient_updates,
            fmt_real(t.mttkrp_seconds),
            fmt_real(t.update_seconds),
        );
        for c in t
            .per_factor
            .element_updates
            .iter()
            .chain(&t.per_factor.gradient_updates)
        {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trace(traces: &[IterTrace], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_trace(traces))?;
    Ok(())
}

pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<IterTrace>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(parse_err(path, 1, "missing trace header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 16 {
            return Err(parse_err(path, lineno, format!("expected 16 fields, got {}", f.len())));
        }
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| parse_err(path, lineno, format!("bad real {s:?}: {e}")))
        };
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| parse_err(path, lineno, format!("bad count {s:?}: {e}")))
        };
        let mut per_factor = Counters::default();
        for i in 0..4 {
            per_factor.element_updates[i] = int(f[8 + i])?;
            per_factor.gradient_updates[i] = int(f[12 + i])?;
        }
        out.push(IterTrace {
            iter: int(f[0])? as usize,
            objective: real(f[1])?,
            nrv: real(f[2])?,
            wall_seconds: real(f[3])?,
            element_updates: int(f[4])?,
            gradient_updates: int(f[5])?,
            mttkrp_seconds: real(f[6])?,
            update_seconds: real(f[7])?,
            per_factor,
        });
    }
    Ok(out)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<IterTrace>> {
    let path = path.as_ref();
    parse_trace(&fs::read_to_string(path)?, path)
}
