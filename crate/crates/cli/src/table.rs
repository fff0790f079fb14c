//! Result tables and their CSV form.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Column excluded when comparing runs for reproducibility.
pub const WALL_TIME: &str = "wall_time_s";

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// Floats keep 17 significant digits so the text round-trips exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&format_float(*x)),
            Value::Text(s) => f.write_str(s),
            Value::Empty => Ok(()),
        }
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as u64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.columns.len() {
            bail!("row has {} cells, table has {} columns", row.len(), self.columns.len());
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .with_context(|| format!("no column {name:?}"))
    }

    /// All values of a column.
    pub fn values(&self, name: &str) -> Result<Vec<&Value>> {
        let j = self.column(name)?;
        Ok(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        self.values(name)?
            .into_iter()
            .map(|v| v.as_f64().with_context(|| format!("column {name:?} holds {v:?}")))
            .collect()
    }

    /// Rows whose text column `name` equals `value`.
    pub fn filter(&self, name: &str, value: &str) -> Result<Table> {
        let j = self.column(name)?;
        Ok(Table {
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| r[j].as_str() == Some(value)).cloned().collect(),
        })
    }

    /// CSV text without the listed columns.
    pub fn to_csv_excluding(&self, skip: &[&str]) -> Result<String> {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&j| !skip.contains(&self.columns[j].as_str()))
            .collect();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        w.write_record(keep.iter().map(|&j| self.columns[j].as_str()))?;
        for row in &self.rows {
            w.write_record(keep.iter().map(|&j| row[j].to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv flush failed: {e}"))?;
        Ok(String::from_utf8(bytes)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        self.to_csv_excluding(&[])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).with_context(|| format!("writing {}", path.display()))
    }
}

/// Long-format `(x, series, y)` records, one per row of `table`.
///
/// The series label is `prefix` followed by the series column's value.
pub fn plot_data(table: &Table, x: &str, series: &str, y: &str, prefix: &str) -> Result<Table> {
    let (jx, js, jy) = (table.column(x)?, table.column(series)?, table.column(y)?);
    let mut out = Table::new(&["x", "series", "y"]);
    for row in &table.rows {
        let label = match &row[js] {
            Value::Float(v) => format!("{prefix}{v}"),
            other => format!("{prefix}{other}"),
        };
        out.push(vec![row[jx].clone(), Value::Text(label), row[jy].clone()])?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["dt", "k", "error", WALL_TIME]);
        for (dt, k, e) in [(0.4, 1usize, 1e-3), (0.4, 2, 2e-4), (0.3, 1, 5e-3)] {
            t.push(vec![dt.into(), k.into(), e.into(), 0.25.into()]).unwrap();
        }
        t
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1.2566212807763046e-05, -2.5e300, 0.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn csv_layout() {
        let t = sample();
        let csv = t.to_csv_excluding(&[WALL_TIME]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "dt,k,error");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("4.0000000000000002e-1,1,"));
        assert!(t.to_csv().unwrap().lines().next().unwrap().ends_with(WALL_TIME));
    }

    #[test]
    fn text_with_commas_is_quoted() {
        let mut t = Table::new(&["label"]);
        t.push(vec!["a,b".into()]).unwrap();
        assert_eq!(t.to_csv().unwrap(), "label\n\"a,b\"\n");
        assert!(t.push(vec![]).is_err());
    }

    #[test]
    fn long_format() {
        let p = plot_data(&sample(), "k", "dt", "error", "ΔT=").unwrap();
        assert_eq!(p.rows.len(), 3);
        assert_eq!(p.rows[0][1], Value::Text("ΔT=0.4".into()));
        assert_eq!(p.rows[2][1], Value::Text("ΔT=0.3".into()));
        let empty = plot_data(&Table::new(&["dt", "k", "error"]), "k", "dt", "error", "ΔT=").unwrap();
        assert_eq!(empty.to_csv().unwrap(), "x,series,y\n");
    }
}
