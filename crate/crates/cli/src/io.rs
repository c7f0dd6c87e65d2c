use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::{Format, Opts};
use crate::Failure;

/// A numeric series read from CSV, with the ground truth when present.
#[derive(Debug, Clone)]
pub struct Series {
    pub y: Vec<f64>,
    pub truth: Option<Vec<f64>>,
}

/// Column-oriented table; all columns have equal length.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<(String, Vec<Value>)>,
}

impl Table {
    pub fn push(&mut self, name: &str, values: Vec<Value>) {
        self.columns.push((name.to_string(), values));
    }

    pub fn push_f64(&mut self, name: &str, values: &[f64]) {
        self.push(name, values.iter().map(|v| json!(v)).collect());
    }

    pub fn push_usize(&mut self, name: &str, values: impl IntoIterator<Item = usize>) {
        self.push(name, values.into_iter().map(|v| json!(v)).collect());
    }

    fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (name, vals) in &self.columns {
            m.insert(name.clone(), Value::Array(vals.clone()));
        }
        Value::Object(m)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn read_text(path: Option<&Path>) -> Result<String, Failure> {
    let mut s = String::new();
    match path {
        Some(p) => File::open(p)
            .and_then(|mut f| f.read_to_string(&mut s))
            .map_err(|e| Failure::runtime("io", format!("cannot read {}: {e}", p.display())))?,
        None => io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::runtime("io", format!("cannot read standard input: {e}")))?,
    };
    Ok(s)
}

fn parse_records(text: &str, origin: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Failure::runtime("input", format!("{origin}: {e}")))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Failure::runtime("input", format!("{origin}: {e}")))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| Failure::runtime("input", format!("{origin}: row {}: {e}", k + 2)))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Failure::runtime(
                "input",
                format!("{origin}: row {} holds a non-finite value", k + 2),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::runtime("input", format!("{origin}: no data rows")));
    }
    Ok((headers, rows))
}

fn origin(path: Option<&Path>) -> String {
    path.map_or("standard input".to_string(), |p| p.display().to_string())
}

/// Observation column: `observation`, else `y`, else the last column.
pub fn read_series(path: Option<&Path>) -> Result<Series, Failure> {
    let text = read_text(path)?;
    let (headers, rows) = parse_records(&text, &origin(path))?;
    let find = |name: &str| headers.iter().position(|h| h == name);
    let obs = find("observation")
        .or_else(|| find("y"))
        .unwrap_or(headers.len() - 1);
    let y = rows.iter().map(|r| r[obs]).collect();
    let truth = find("truth")
        .filter(|&t| t != obs)
        .map(|t| rows.iter().map(|r| r[t]).collect());
    Ok(Series { y, truth })
}

/// Truth column for custom signals: `truth`, else the last column.
pub fn read_truth(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = read_text(Some(path))?;
    let (headers, rows) = parse_records(&text, &origin(Some(path)))?;
    let col = headers
        .iter()
        .position(|h| h == "truth")
        .unwrap_or(headers.len() - 1);
    Ok(rows.iter().map(|r| r[col]).collect())
}

/// Dense matrix, one row per observation, header row skipped.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let text = read_text(Some(path))?;
    Ok(parse_records(&text, &origin(Some(path)))?.1)
}

fn write_to(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    let res = match path {
        Some(p) => File::create(p).and_then(|mut f| f.write_all(bytes)),
        None => io::stdout().lock().write_all(bytes),
    };
    res.map_err(|e| Failure::runtime("io", format!("cannot write {}: {e}", origin(path))))
}

fn csv_bytes(table: &Table) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Failure::runtime("io", e.to_string());
    w.write_record(table.columns.iter().map(|c| c.0.as_str()))
        .map_err(io_err)?;
    for i in 0..table.rows() {
        w.write_record(table.columns.iter().map(|c| cell(&c.1[i])))
            .map_err(io_err)?;
    }
    w.into_inner()
        .map_err(|e| Failure::runtime("io", e.to_string()))
}

/// Writes the result of a command.
///
/// `csv`: the table goes to `--output` (or stdout) and the report to stdout
/// when `--output` is a file, else to stderr. `json`: one document holding
/// the report and a `data` object of columns goes to `--output` (or stdout).
pub fn emit(opts: &Opts, format: Format, table: &Table, mut report: Value) -> Result<(), Failure> {
    let out = opts.output.as_deref();
    match format {
        Format::Csv => {
            write_to(out, &csv_bytes(table)?)?;
            let text = format!("{}\n", serde_json::to_string_pretty(&report).expect("json"));
            if out.is_some() {
                write_to(None, text.as_bytes())
            } else {
                io::stderr()
                    .lock()
                    .write_all(text.as_bytes())
                    .map_err(|e| Failure::runtime("io", e.to_string()))
            }
        }
        Format::Json => {
            if let Value::Object(m) = &mut report {
                m.insert("data".into(), table.to_json());
            }
            let text = format!("{}\n", serde_json::to_string_pretty(&report).expect("json"));
            write_to(out, text.as_bytes())
        }
    }
}
