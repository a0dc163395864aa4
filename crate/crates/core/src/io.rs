//! Long-format curve CSV, label files and JSON helpers.
//!
//! Curve files have the header `curve_id,variable,role,t,value` with role `X`
//! or `Y`. Curve ids and variable names keep their order of first appearance.

use crate::em::BicRow;
use crate::error::{Error, Result};
use crate::funbasis::{CurveSet, Role, Series};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

pub const CURVE_HEADER: [&str; 5] = ["curve_id", "variable", "role", "t", "value"];

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { line: line as usize, msg: msg.into() }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(line, e.to_string())
}

fn parse_f64(s: &str, what: &str, line: u64) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| parse_err(line, format!("{what} '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} '{s}' is not finite")));
    }
    Ok(v)
}

pub fn read_curves<R: Read>(reader: R) -> Result<CurveSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != CURVE_HEADER {
        return Err(parse_err(1, format!("expected header {}", CURVE_HEADER.join(","))));
    }
    let mut ids: Vec<String> = Vec::new();
    let mut id_pos: HashMap<String, usize> = HashMap::new();
    let mut names: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut role_of: HashMap<String, Role> = HashMap::new();
    // (curve, role, variable) -> samples
    let mut samples: HashMap<(usize, usize, usize), Vec<(f64, f64, u64)>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, found {}", rec.len())));
        }
        let id = &rec[0];
        let var = &rec[1];
        if id.is_empty() || var.is_empty() {
            return Err(parse_err(line, "empty curve id or variable"));
        }
        let role = match &rec[2] {
            "X" | "x" => Role::X,
            "Y" | "y" => Role::Y,
            other => return Err(parse_err(line, format!("role '{other}' is neither X nor Y"))),
        };
        let t = parse_f64(&rec[3], "t", line)?;
        let v = parse_f64(&rec[4], "value", line)?;
        match role_of.get(var) {
            Some(r) if *r != role => {
                return Err(parse_err(line, format!("variable '{var}' appears with both roles")))
            }
            Some(_) => {}
            None => {
                role_of.insert(var.to_string(), role);
                names[role as usize].push(var.to_string());
            }
        }
        let ci = *id_pos.entry(id.to_string()).or_insert_with(|| {
            ids.push(id.to_string());
            ids.len() - 1
        });
        let vi = names[role as usize].iter().position(|n| n == var).expect("registered");
        samples.entry((ci, role as usize, vi)).or_default().push((t, v, line));
    }
    if ids.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    if names[0].is_empty() || names[1].is_empty() {
        return Err(Error::Domain("need at least one X and one Y variable".into()));
    }
    let mut side = |r: usize| -> Result<Vec<Vec<Series>>> {
        (0..ids.len())
            .map(|ci| {
                (0..names[r].len())
                    .map(|vi| {
                        let mut pts = samples.remove(&(ci, r, vi)).ok_or_else(|| {
                            Error::Domain(format!("curve {}: variable '{}' missing", ids[ci], names[r][vi]))
                        })?;
                        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                        if let Some(w) = pts.windows(2).find(|w| w[0].0 == w[1].0) {
                            return Err(parse_err(
                                w[1].2,
                                format!("curve {}: duplicate t = {} for '{}'", ids[ci], w[1].0, names[r][vi]),
                            ));
                        }
                        Ok(Series {
                            t: pts.iter().map(|p| p.0).collect(),
                            values: pts.iter().map(|p| p.1).collect(),
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let x = side(0)?;
    let y = side(1)?;
    let [x_names, y_names] = names;
    Ok(CurveSet { ids, x_names, y_names, x, y })
}

/// Shortest decimal that reads back to the same `f64`, with an exponent for very
/// large or small magnitudes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Opens a file, naming the path in the error.
pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn read_curves_file(path: &Path) -> Result<CurveSet> {
    read_curves(open(path)?)
}

pub fn write_curves<W: Write>(writer: W, curves: &CurveSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CURVE_HEADER).map_err(csv_io)?;
    for (i, id) in curves.ids.iter().enumerate() {
        for (role, names, series) in [("X", &curves.x_names, &curves.x[i]), ("Y", &curves.y_names, &curves.y[i])] {
            for (name, s) in names.iter().zip(series) {
                for (t, v) in s.t.iter().zip(&s.values) {
                    w.write_record([id.as_str(), name, role, &fmt_f64(*t), &fmt_f64(*v)]).map_err(csv_io)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Domain(format!("{other:?}")),
    }
}

/// `curve_id,cluster` with 1-based clusters.
pub fn write_truth<W: Write>(writer: W, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["curve_id", "cluster"]).map_err(csv_io)?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.clone(), (l + 1).to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `curve_id,cluster` file (any positive integer labels) and returns
/// 0-based labels ordered like `ids`.
pub fn read_truth<R: Read>(reader: R, ids: &[String]) -> Result<Vec<usize>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 2 {
            return Err(parse_err(line, "expected curve_id,cluster"));
        }
        let l: usize = rec[1]
            .parse()
            .ok()
            .filter(|&l| l >= 1)
            .ok_or_else(|| parse_err(line, format!("cluster '{}' is not a positive integer", &rec[1])))?;
        map.insert(rec[0].to_string(), l - 1);
    }
    ids.iter()
        .map(|id| map.get(id).copied().ok_or_else(|| Error::Domain(format!("no label for curve {id}"))))
        .collect()
}

/// `curve_id,label,t_1..t_K` with 1-based labels and posterior rows.
pub fn write_labels<W: Write>(writer: W, ids: &[String], labels: &[usize], t: &nalgebra::DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["curve_id".to_string(), "label".to_string()];
    header.extend((1..=t.ncols()).map(|k| format!("t_{k}")));
    w.write_record(&header).map_err(csv_io)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone(), (labels[i] + 1).to_string()];
        row.extend(t.row(i).iter().map(|&v| fmt_f64(v)));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_f64)
}

pub fn write_bic_table<W: Write>(writer: W, rows: &[BicRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "k",
        "flm_variant",
        "sigma_y_family",
        "common_psi_x",
        "common_psi_y",
        "family_x",
        "family_y",
        "threshold",
        "loglik",
        "n_params",
        "bic",
        "error",
    ])
    .map_err(csv_io)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.flm_variant.to_string(),
            r.sigma_y_family.to_string(),
            r.common_psi_x.to_string(),
            r.common_psi_y.to_string(),
            r.family_x.name().to_string(),
            r.family_y.name().to_string(),
            opt_f64(r.threshold),
            opt_f64(r.loglik),
            r.n_params.map_or(String::new(), |v| v.to_string()),
            opt_f64(r.bic),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Domain(format!("serialization failed: {e}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s)?;
    serde_json::from_str(&s).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "curve_id,variable,role,t,value\n\
        a,x,X,0.0,1\na,x,X,0.5,2\na,y,Y,0.0,3\n\
        b,y,Y,0.0,4\nb,x,X,0.5,5\nb,x,X,0.0,6\n";

    #[test]
    fn reads_and_groups() {
        let c = read_curves(SAMPLE.as_bytes()).unwrap();
        assert_eq!(c.ids, vec!["a", "b"]);
        assert_eq!(c.x_names, vec!["x"]);
        assert_eq!(c.y_names, vec!["y"]);
        assert_eq!(c.x[1][0].t, vec![0.0, 0.5]);
        assert_eq!(c.x[1][0].values, vec![6.0, 5.0]);
        let mut out = Vec::new();
        write_curves(&mut out, &c).unwrap();
        assert_eq!(read_curves(out.as_slice()).unwrap(), c);
    }

    #[test]
    fn bad_row_names_line() {
        let bad = "curve_id,variable,role,t,value\na,x,X,0.0,1\na,x,X,zz,2\n";
        match read_curves(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad_role = "curve_id,variable,role,t,value\na,x,Z,0.0,1\n";
        assert!(matches!(read_curves(bad_role.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }
}
