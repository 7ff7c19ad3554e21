use super::sweep::SweepRecord;
use crate::error::{Error, Result};
use crate::model::C64;
use crate::width::GreenWidth;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use std::io::{self, Write};
use std::path::Path;

pub const RECORDS_HEADER: &str = "h,theta,rho_re,rho_im,residual,green_im,floor";

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes successful records; failed ones are only kept in the JSON output.
pub fn write_records_csv<W: Write>(mut w: W, records: &[SweepRecord]) -> io::Result<()> {
    writeln!(w, "{RECORDS_HEADER}")?;
    for r in records.iter().filter(|r| r.ok()) {
        let green = match r.green {
            Some(GreenWidth::Value(v)) => f17(v),
            Some(GreenWidth::BelowFloor(_)) => "floor".into(),
            None => String::new(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            f17(r.h),
            f17(r.theta),
            f17(r.rho.re),
            f17(r.rho.im),
            f17(r.residual),
            green,
            r.floor
        )?;
    }
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = std::fs::read_to_string(path)?;
    parse_records_csv(&text)
}

pub fn parse_records_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RECORDS_HEADER => {}
        _ => return Err(Error::Config(format!("records file must start with `{RECORDS_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Config(format!("records line {}: {what}", i + 2));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(bad("expected 7 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("not a number: {s:?}")));
        let floor = match f[6] {
            "true" => true,
            "false" => false,
            s => return Err(bad(&format!("floor flag {s:?}"))),
        };
        let green = match f[5] {
            "" => None,
            "floor" => Some(GreenWidth::BelowFloor(f64::NAN)),
            s => Some(GreenWidth::Value(num(s)?)),
        };
        out.push(SweepRecord {
            h: num(f[0])?,
            theta: num(f[1])?,
            rho: C64::new(num(f[2])?, num(f[3])?),
            residual: num(f[4])?,
            green,
            floor,
            floor_value: f64::NAN,
            iterations: 0,
            nodes: 0,
            elapsed_ms: 0.0,
            error: None,
            green_error: None,
        });
    }
    Ok(out)
}

/// Pretty JSON with every float written to 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(f17(value).as_bytes())
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

pub fn write_json<W: Write, T: Serialize + ?Sized>(w: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(w, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    write_json(&mut buf, value).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn write_json_file(path: &Path, value: &Value) -> Result<()> {
    let mut s = json_string(value);
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}
