//! CSV output with `%.9g`-style numbers and `\n` line endings.

use std::fmt::Write as _;

const SIGNIFICANT: i32 = 9;

/// Formats `x` like C's `%.9g`.
pub fn format_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // the exponent after rounding to the requested digits
    let sci = format!("{:.*e}", (SIGNIFICANT - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIGNIFICANT - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Accumulates rows in memory.
#[derive(Debug, Clone)]
pub struct CsvTable {
    columns: usize,
    text: String,
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Blank,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Blank, Cell::Num)
    }
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        CsvTable {
            columns: header.len(),
            text,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns, "row width");
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match cell {
                Cell::Num(v) => self.text.push_str(&format_g(*v)),
                Cell::Int(v) => {
                    let _ = write!(self.text, "{v}");
                }
                Cell::Text(s) => self.text.push_str(s),
                Cell::Blank => {}
            }
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (2.0 / 3.0 * 1e-12, "6.66666667e-13"),
            (-42.125, "-42.125"),
            (999999999.5, "1e+09"),
            (0.0, "0"),
            (60.0, "60"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g(x), want, "{x}");
        }
        assert_eq!(format_g(f64::NAN), "nan");
    }

    #[test]
    fn table_layout() {
        let mut t = CsvTable::new(&["a", "b", "c"]);
        t.push(vec![1.5.into(), Cell::Blank, "x".into()]);
        t.push(vec![2u64.into(), None.into(), Some(0.25).into()]);
        assert_eq!(t.as_str(), "a,b,c\n1.5,,x\n2,,0.25\n");
    }
}
