//! Aggregation of sweep records.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::{fmt_real, ResultRecord, Status};
use crate::erm::Method;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Method,
    Epsilon,
    Delta,
    M,
    Lambda,
    Rep,
}

impl Field {
    pub fn name(&self) -> &'static str {
        match self {
            Field::Method => "method",
            Field::Epsilon => "epsilon",
            Field::Delta => "delta",
            Field::M => "M",
            Field::Lambda => "lambda",
            Field::Rep => "rep",
        }
    }

    fn of(&self, r: &ResultRecord) -> KeyValue {
        match self {
            Field::Method => KeyValue::Method(r.method),
            Field::Epsilon => KeyValue::Real(r.epsilon),
            Field::Delta => KeyValue::Real(r.delta),
            Field::M => KeyValue::Int(r.m as u64),
            Field::Lambda => KeyValue::Real(r.lambda),
            Field::Rep => KeyValue::Int(r.rep as u64),
        }
    }
}

impl FromStr for Field {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "method" => Ok(Field::Method),
            "epsilon" => Ok(Field::Epsilon),
            "delta" => Ok(Field::Delta),
            "M" | "m" => Ok(Field::M),
            "lambda" => Ok(Field::Lambda),
            "rep" => Ok(Field::Rep),
            other => Err(Error::config(format!("cannot group by '{other}'"))),
        }
    }
}

/// How records are grouped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupBy {
    /// Per `(method, epsilon)`: the smallest error over `(M, lambda)` in
    /// each repetition, then statistics of those minima across repetitions.
    Best,
    /// Statistics of the errors of all ok records sharing these fields.
    Fields(Vec<Field>),
}

impl GroupBy {
    pub fn fields(&self) -> Vec<Field> {
        match self {
            GroupBy::Best => vec![Field::Method, Field::Epsilon],
            GroupBy::Fields(f) => f.clone(),
        }
    }
}

impl FromStr for GroupBy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "best" {
            return Ok(GroupBy::Best);
        }
        let fields = s
            .split(',')
            .filter(|f| !f.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Field>>>()?;
        if fields.is_empty() {
            return Err(Error::config("group-by needs at least one field"));
        }
        Ok(GroupBy::Fields(fields))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeyValue {
    Method(Method),
    Real(f64),
    Int(u64),
}

impl KeyValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KeyValue::Method(a), KeyValue::Method(b)) => a.code().cmp(&b.code()),
            (KeyValue::Real(a), KeyValue::Real(b)) => a.total_cmp(b),
            (KeyValue::Int(a), KeyValue::Int(b)) => a.cmp(b),
            _ => unreachable!("keys of one grouping have the same shape"),
        }
    }
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Method(m) => write!(f, "{m}"),
            KeyValue::Real(v) => f.write_str(&fmt_real(*v)),
            KeyValue::Int(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Key(Vec<KeyValue>);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<KeyValue>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub count: usize,
}

fn row(key: Vec<KeyValue>, values: &[f64]) -> SummaryRow {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    SummaryRow {
        key,
        mean,
        sd,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        count: n,
    }
}

/// Groups ok records and summarizes their test errors, in key order.
pub fn summarize(records: &[ResultRecord], group_by: &GroupBy) -> Result<Vec<SummaryRow>> {
    let ok = records.iter().filter_map(|r| match (r.status, r.test_mse) {
        (Status::Ok, Some(v)) => Some((r, v)),
        _ => None,
    });
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    match group_by {
        GroupBy::Best => {
            let mut best: BTreeMap<Key, f64> = BTreeMap::new();
            for (r, v) in ok {
                let k = Key(vec![
                    KeyValue::Method(r.method),
                    KeyValue::Real(r.epsilon),
                    KeyValue::Int(r.rep as u64),
                ]);
                let e = best.entry(k).or_insert(v);
                *e = e.min(v);
            }
            for (Key(mut k), v) in best {
                k.pop();
                groups.entry(Key(k)).or_default().push(v);
            }
        }
        GroupBy::Fields(fields) => {
            for (r, v) in ok {
                let k = Key(fields.iter().map(|f| f.of(r)).collect());
                groups.entry(k).or_default().push(v);
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::data("no successful records to summarize"));
    }
    Ok(groups.into_iter().map(|(Key(k), v)| row(k, &v)).collect())
}

/// Writes the grouping fields followed by `mean,sd,min,count`.
pub fn write_summary(path: &Path, group_by: &GroupBy, rows: &[SummaryRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header: Vec<&str> = group_by.fields().iter().map(Field::name).collect();
    header.extend(["mean", "sd", "min", "count"]);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut cells: Vec<String> = r.key.iter().map(KeyValue::to_string).collect();
        cells.extend([fmt_real(r.mean), fmt_real(r.sd), fmt_real(r.min), r.count.to_string()]);
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}
