//! Report files. Every float is written with 17 significant digits in
//! locale-independent scientific notation. Fields that may be non-finite
//! carry `serde_ext`, which writes them as the strings `"inf"`, `"-inf"`
//! and `"nan"`; in CSV they appear unquoted.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::ldp::LdpReport;

pub const LDP_CSV_HEADER: &str = "epsilon,estimate,stderr,empirical_rate,theory_rate,tilt_norm,ess";

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Pretty JSON with floats as `{:.16e}`.
struct SciFormatter(PrettyFormatter<'static>);

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
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

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn ldp_csv(report: &LdpReport) -> String {
    let mut s = String::from(LDP_CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let fields = [
            r.epsilon,
            r.estimate,
            r.stderr,
            r.empirical_rate,
            report.theory_rate,
            r.tilt_norm,
            r.ess,
        ];
        s.push_str(&fields.map(fmt_f64).join(","));
        s.push('\n');
    }
    s
}

pub fn table_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.into_iter().map(fmt_f64).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldp::{LdpRow, Speed};

    fn row(eps: f64) -> LdpRow {
        LdpRow {
            epsilon: eps,
            estimate: 0.25,
            stderr: 0.01,
            log_estimate: 0.25f64.ln(),
            empirical_rate: 0.1,
            tilt_norm: 1.0,
            ess: 900.0,
            hits: 1000,
            reliable: true,
        }
    }

    #[test]
    fn csv_shapes() {
        let mut rep = LdpReport {
            rows: vec![row(0.5), row(0.25), row(0.125)],
            theory_rate: 0.5,
            speed: Speed::Eps2,
            samples: 1000,
            seed: 1,
        };
        let csv = ldp_csv(&rep);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], LDP_CSV_HEADER);
        assert!(lines[1].starts_with("5.0000000000000000e-1,2.5000000000000000e-1,"));
        assert!(ldp_csv(&LdpReport { rows: vec![row(0.3)], ..rep.clone() }).contains("\n2.9999999999999999e-1,"));
        assert!(lines[1].contains(",5.0000000000000000e-1,"));
        rep.rows.clear();
        assert_eq!(ldp_csv(&rep), format!("{LDP_CSV_HEADER}\n"));
    }

    #[test]
    fn json_floats_round_trip() {
        #[derive(Serialize)]
        struct T {
            a: f64,
            #[serde(with = "crate::serde_ext")]
            b: f64,
            n: u64,
        }
        let x = 0.1 + 0.2;
        let bytes = to_json(&T { a: x, b: f64::INFINITY, n: 7 }).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"a\": 3.0000000000000004e-1"), "{text}");
        assert!(text.contains("\"b\": \"inf\""));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["a"].as_f64().unwrap().to_bits(), x.to_bits());
        assert_eq!(fmt_f64(-0.5), "-5.0000000000000000e-1");
    }
}
