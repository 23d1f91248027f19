//! Result rows and fit records in the on-disk schema.

use std::io::{BufRead, Write};

use serde::Serialize;
use serde_json::value::RawValue;

use crate::analytics::ScalingSeries;
use crate::error::{Error, Result};
use crate::format::{g17, json_number};
use crate::montecarlo::{Estimate, Method};

pub const CSV_HEADER: &str = "model,beta,n,quantity,value,method,std_error";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub beta: f64,
    pub n: usize,
    pub quantity: String,
    pub value: f64,
    pub method: Method,
    pub std_error: f64,
}

impl ResultRow {
    pub fn exact(model: &str, beta: f64, n: usize, quantity: &str, value: f64) -> Self {
        Self::from_estimate(model, beta, n, quantity, &Estimate::exact(value))
    }

    pub fn from_estimate(
        model: &str,
        beta: f64,
        n: usize,
        quantity: &str,
        estimate: &Estimate,
    ) -> Self {
        Self {
            model: model.to_string(),
            beta,
            n,
            quantity: quantity.to_string(),
            value: estimate.value,
            method: estimate.method,
            std_error: estimate.std_error,
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.model,
            g17(self.beta),
            self.n,
            self.quantity,
            g17(self.value),
            self.method.as_str(),
            g17(self.std_error)
        )
    }

    fn parse(line: &str, line_no: usize) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", fields.len())));
        }
        let float = |s: &str, name: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("{name}: not a number: {s:?}")))
        };
        let method = match fields[5].trim() {
            "exact" => Method::Exact,
            "mc" => Method::MC,
            other => return Err(bad(format!("method: unknown value {other:?}"))),
        };
        Ok(Self {
            model: fields[0].trim().to_string(),
            beta: float(fields[1], "beta")?,
            n: fields[2]
                .trim()
                .parse()
                .map_err(|_| bad(format!("n: not an integer: {:?}", fields[2])))?,
            quantity: fields[3].trim().to_string(),
            value: float(fields[4], "value")?,
            method,
            std_error: float(fields[6], "std_error")?,
        })
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if line.trim() != CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header {CSV_HEADER:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        rows.push(ResultRow::parse(&line, idx + 1)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub quantity: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

impl FitRecord {
    pub fn new(quantity: String, series: &ScalingSeries) -> Self {
        Self {
            quantity,
            slope: series.slope,
            intercept: series.intercept,
            r2: series.r_squared,
            n_points: series.n_points(),
        }
    }
}

/// `<quantity>@beta=<β>`, the label under which a per-β fit is recorded.
pub fn fit_label(quantity: &str, beta: f64) -> String {
    format!("{quantity}@beta={}", g17(beta))
}

pub fn fits_to_json(fits: &[FitRecord]) -> Result<String> {
    #[derive(Serialize)]
    struct Record<'a> {
        quantity: &'a str,
        slope: Box<RawValue>,
        intercept: Box<RawValue>,
        r2: Box<RawValue>,
        n_points: usize,
    }
    let records: Vec<Record> = fits
        .iter()
        .map(|f| Record {
            quantity: &f.quantity,
            slope: json_number(f.slope),
            intercept: json_number(f.intercept),
            r2: json_number(f.r2),
            n_points: f.n_points,
        })
        .collect();
    Ok(serde_json::to_string_pretty(&records)?)
}
