//! Minimal CSV output. Every table has a header row; floats are written
//! with 12 significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};

/// Round to 12 significant digits and print the shortest decimal that
/// reads back to the rounded value.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("float formatting round-trips");
    let mag = rounded.abs();
    if mag != 0.0 && !(1e-5..1e16).contains(&mag) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_f64(2.0f64.ln()), "0.69314718056");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(2.220446049250313e-16), "2.22044604925e-16");
        assert_eq!(fmt_f64(-1.5e20), "-1.5e20");
        assert_eq!(fmt_f64(0.0), "0");
    }

    #[test]
    fn header_always_written() {
        let mut t = Table::new(&["a", "b"]);
        assert_eq!(t.to_csv_string(), "a,b\n");
        t.push(vec!["1".into(), fmt_f64(0.25)]);
        assert_eq!(t.to_csv_string(), "a,b\n1,0.25\n");
    }
}
