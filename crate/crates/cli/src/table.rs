//! Row output shared by the sweep commands: CSV with a fixed header, or a JSON
//! array of objects with the same field names.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::{Map, Number, Value};

pub const SIG_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<Option<bool>> for Cell {
    fn from(b: Option<bool>) -> Self {
        b.map_or(Cell::Empty, Cell::Bool)
    }
}

/// `x` rounded to [`SIG_DIGITS`] significant digits, trailing zeros dropped.
/// Plain decimal for moderate exponents, `e` notation otherwise.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("e notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        // place the decimal point in the already-rounded digit string
        let (sign, mantissa) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
        let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
        let plain = if exp < 0 {
            format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
        } else if exp as usize + 1 >= digits.len() {
            format!("{digits}{}", "0".repeat(exp as usize + 1 - digits.len()))
        } else {
            let (int, frac) = digits.split_at(exp as usize + 1);
            format!("{int}.{frac}")
        };
        format!("{sign}{}", trim_zeros(&plain))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::Num(x) => fmt_sig(*x),
        Cell::Int(i) => i.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

fn json_cell(c: &Cell) -> Value {
    match c {
        // round-trip through the CSV text so both formats carry the same digits
        Cell::Num(x) => fmt_sig(*x)
            .parse::<f64>()
            .ok()
            .and_then(Number::from_f64)
            .map_or(Value::Null, Value::Number),
        Cell::Int(i) => Value::from(*i),
        Cell::Bool(b) => Value::Bool(*b),
        Cell::Text(s) => Value::String(s.clone()),
        Cell::Empty => Value::Null,
    }
}

pub fn render(columns: &[&str], rows: &[Vec<Cell>], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = columns.join(",");
            out.push('\n');
            for row in rows {
                let line: Vec<String> = row.iter().map(csv_cell).collect();
                writeln!(out, "{}", line.join(",")).unwrap();
            }
            out
        }
        Format::Json => {
            let array: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = columns
                        .iter()
                        .zip(row)
                        .map(|(k, c)| (k.to_string(), json_cell(c)))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            let mut out = serde_json::to_string_pretty(&Value::Array(array)).unwrap();
            out.push('\n');
            out
        }
    }
}
