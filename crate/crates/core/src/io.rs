//! Process specifications as JSON and result tables as CSV.
//!
//! ```json
//! {"d": 1, "p": 1, "jumps": [{"from": 1, "to": 1,
//!   "atoms": [{"dx": [-1], "prob": 0.2}, {"dx": [1], "prob": 0.8}]}]}
//! ```
//!
//! States are numbered from 1 in files and from 0 in the API.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::boundary::TraceEntry;
use crate::error::{Error, Result};
use crate::green::Comparison;
use crate::process::{JumpMeasure, LatticeVector, ProcessSpec};
use crate::transforms::ScanReport;

fn field<'a>(obj: &'a Map<String, Value>, name: &str, path: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| Error::schema(join(path, name), "missing field"))
}

fn join(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::schema(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::schema(path, "expected an array"))
}

fn as_count(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .filter(|&n| n > 0)
        .map(|n| n as usize)
        .ok_or_else(|| Error::schema(path, "expected a positive integer"))
}

/// Parses and structurally validates a specification.
pub fn parse_spec(text: &str) -> Result<ProcessSpec> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = as_object(&root, "$")?;
    let d = as_count(field(obj, "d", "")?, "d")?;
    let p = as_count(field(obj, "p", "")?, "p")?;
    let jumps = as_array(field(obj, "jumps", "")?, "jumps")?;
    let mut raw: Vec<Vec<(LatticeVector, f64)>> = vec![Vec::new(); p * p];
    for (k, entry) in jumps.iter().enumerate() {
        let path = format!("jumps[{k}]");
        let e = as_object(entry, &path)?;
        let state = |name: &str| -> Result<usize> {
            let f = join(&path, name);
            let s = field(e, name, &path)?
                .as_u64()
                .ok_or_else(|| Error::schema(&f, "expected a state index"))? as usize;
            if s == 0 || s > p {
                return Err(Error::schema(&f, format!("state {s} out of range 1..={p}")));
            }
            Ok(s - 1)
        };
        let (i, j) = (state("from")?, state("to")?);
        let atoms = as_array(field(e, "atoms", &path)?, &join(&path, "atoms"))?;
        for (l, atom) in atoms.iter().enumerate() {
            let apath = format!("{path}.atoms[{l}]");
            let a = as_object(atom, &apath)?;
            let dx_path = join(&apath, "dx");
            let dx = as_array(field(a, "dx", &apath)?, &dx_path)?;
            if dx.len() != d {
                return Err(Error::schema(&dx_path, format!("has length {}, expected d = {d}", dx.len())));
            }
            let coords = dx
                .iter()
                .map(|v| v.as_i64().ok_or_else(|| Error::schema(&dx_path, "expected integers")))
                .collect::<Result<Vec<_>>>()?;
            let prob_path = join(&apath, "prob");
            let prob = field(a, "prob", &apath)?
                .as_f64()
                .ok_or_else(|| Error::schema(&prob_path, "expected a number"))?;
            if !(prob >= 0.0) || !prob.is_finite() {
                return Err(Error::schema(&prob_path, format!("probability {prob} is not a finite nonnegative number")));
            }
            raw[i * p + j].push((LatticeVector::new(coords), prob));
        }
    }
    let jumps = raw.into_iter().map(JumpMeasure::from_atoms).collect::<Result<Vec<_>>>()?;
    ProcessSpec::new(d, p, jumps)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<ProcessSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_spec(&text)
}

pub fn spec_to_json(spec: &ProcessSpec) -> String {
    let p = spec.states();
    let mut jumps = Vec::new();
    for i in 0..p {
        for j in 0..p {
            let m = spec.jump(i, j);
            if m.is_empty() {
                continue;
            }
            let atoms: Vec<Value> = m.iter().map(|(x, w)| json!({"dx": x.coords(), "prob": w})).collect();
            jumps.push(json!({"from": i + 1, "to": j + 1, "atoms": atoms}));
        }
    }
    let v = json!({"d": spec.dim(), "p": p, "jumps": jumps});
    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
}

pub fn save_spec(spec: &ProcessSpec, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, spec_to_json(spec))?;
    Ok(())
}

/// Formats like C's `%.12g`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{v:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// A CSV table of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.header.join(",")).unwrap();
        for r in &self.rows {
            writeln!(out, "{}", r.join(",")).unwrap();
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn indexed(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |k| format!("{prefix}_{k}"))
}

pub fn boundary_table(entries: &[TraceEntry], d: usize) -> Table {
    let mut header: Vec<String> = indexed("u", d).chain(indexed("c", d)).chain(indexed("m_c", d)).collect();
    header.extend(["kkt_residual", "roundtrip_residual"].map(String::from));
    let mut t = Table::new(header);
    for e in entries {
        let bp = &e.point;
        let mut row: Vec<String> = bp.u.iter().chain(&bp.c).chain(&bp.m_c).map(|&v| fmt_num(v)).collect();
        row.push(fmt_num(bp.kkt_residual));
        row.push(fmt_num(e.roundtrip_residual));
        t.rows.push(row);
    }
    t
}

pub fn comparison_table(cmp: &Comparison) -> Table {
    let d = cmp.u.len();
    let mut header = vec!["r".to_string()];
    header.extend(indexed("x", d));
    header.extend(["method", "value", "error", "asym", "ratio"].map(String::from));
    let mut t = Table::new(header);
    for r in &cmp.rows {
        let mut row = vec![fmt_num(r.r)];
        row.extend(r.x.iter().map(|v| v.to_string()));
        row.push(r.method.name().to_string());
        row.extend([r.value, r.error, r.asym, r.ratio].map(fmt_num));
        t.rows.push(row);
    }
    t
}

pub fn scan_table(report: &ScanReport) -> Table {
    let d = report.argmax.len();
    let mut header: Vec<String> = vec!["grid_points".into(), "excluded_radius".into(), "max_radius".into()];
    header.extend(indexed("argmax", d));
    let mut row = vec![
        report.grid_points.to_string(),
        fmt_num(report.excluded_radius),
        fmt_num(report.max_radius),
    ];
    row.extend(report.argmax.iter().map(|&v| fmt_num(v)));
    Table { header, rows: vec![row] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    const W1: &str = r#"{"d": 1, "p": 1, "jumps": [{"from": 1, "to": 1,
        "atoms": [{"dx": [-1], "prob": 0.2}, {"dx": [0], "prob": 0.3}, {"dx": [1], "prob": 0.5}]}]}"#;

    #[test]
    fn parse_w1() {
        let s = parse_spec(W1).unwrap();
        assert_eq!((s.dim(), s.states(), s.jump(0, 0).len()), (1, 1, 3));
        assert_eq!(s, catalog::w1());
    }

    #[test]
    fn round_trip() {
        for spec in [catalog::w1(), catalog::w2(), catalog::w3(), catalog::sublattice()] {
            assert_eq!(parse_spec(&spec_to_json(&spec)).unwrap(), spec);
        }
    }

    #[test]
    fn row_mass_names_row() {
        let text = W1.replace("0.5", "0.49");
        assert!(matches!(parse_spec(&text), Err(Error::RowMass { row: 1, .. })));
    }

    #[test]
    fn wrong_dx_length() {
        let text = W1.replace("[-1]", "[-1, 0]");
        match parse_spec(&text) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "jumps[0].atoms[0].dx"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_spec("{\n  \"d\": 1,\n  \"p\": ,\n}") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 8)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_bad_fields() {
        assert!(matches!(parse_spec(r#"{"d": 1, "jumps": []}"#), Err(Error::Schema { ref field, .. }) if field == "p"));
        let bad_state = W1.replace("\"to\": 1", "\"to\": 2");
        assert!(matches!(parse_spec(&bad_state), Err(Error::Schema { ref field, .. }) if field == "jumps[0].to"));
        let neg = W1.replace("0.2", "-0.2");
        assert!(matches!(parse_spec(&neg), Err(Error::Schema { .. })));
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(10.0 / 3.0), "3.33333333333");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-2.5e-7), "-2.5e-07");
        assert_eq!(fmt_num(1.5e20), "1.5e+20");
        assert_eq!(fmt_num(123456789012.0), "123456789012");
        assert_eq!(fmt_num(0.4f64.ln()), "-0.916290731874");
        assert_eq!(fmt_num(0.0001), "0.0001");
    }
}
