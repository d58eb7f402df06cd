//! Machine-readable output: CSV with 12 significant digits and JSON with 17.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use crate::error::Result;

/// A CSV number: 12 significant digits in scientific notation.
pub fn csv_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "nan".into()
    }
}

/// Writes `header` and `rows` as comma-separated lines.
pub fn write_csv<W: Write>(out: &mut W, header: &[String], rows: &[Vec<String>]) -> io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `prefix1,…,prefixn`.
pub fn indexed_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Pretty JSON formatter printing every float with 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty-printed JSON; floats carry 17 significant digits, non-finite
/// floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn csv_digits() {
        assert_eq!(csv_number(0.5), "5.00000000000e-1");
        assert_eq!(csv_number(-1.0 / 3.0), "-3.33333333333e-1");
        assert_eq!(csv_number(f64::NAN), "nan");
        assert_eq!(csv_number(1.0 / (4.0 * std::f64::consts::PI)).parse::<f64>().unwrap(), 7.95774715459e-2);
    }

    #[test]
    fn json_round_trips_exactly() {
        #[derive(Serialize)]
        struct R {
            t: f64,
            k: usize,
            v: Vec<f64>,
            name: &'static str,
        }
        let r = R {
            t: std::f64::consts::TAU / 7.0,
            k: 3,
            v: vec![0.1, -2.5e-300, f64::INFINITY],
            name: "x",
        };
        let text = to_json(&r).unwrap();
        assert!(text.contains("\"k\": 3"));
        assert!(text.contains("1.0000000000000001e-1"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["t"].as_f64().unwrap(), r.t);
        assert_eq!(back["v"][1].as_f64().unwrap(), -2.5e-300);
        assert!(back["v"][2].is_null());
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        let mut header = vec!["t".to_string()];
        header.extend(indexed_header("q", 2));
        write_csv(&mut out, &header, &[vec!["1".into(), "2".into(), "3".into()]]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,q1,q2\n1,2,3\n");
    }
}
