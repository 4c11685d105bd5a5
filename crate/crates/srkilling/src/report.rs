//! Deterministic JSON reports.
//!
//! Keys keep insertion order and every float is written with 17
//! significant digits, so identical inputs give byte-identical output.

use std::io;

use serde_json::ser::Formatter;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use srkilling_core::connection::Check;

pub const TOOL: &str = concat!("srkilling ", env!("CARGO_PKG_VERSION"));

/// Hex SHA-256 of a structure definition.
pub fn fingerprint(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

/// Compact JSON with fixed float formatting.
pub fn to_json(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    serde::Serialize::serialize(v, &mut ser).expect("serializing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Finite floats become numbers, others `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn matrix(rows: &[Vec<f64>]) -> Value {
    Value::Array(rows.iter().map(|r| nums(r)).collect())
}

pub fn check(c: &Check) -> Value {
    json!({
        "name": c.name,
        "max_residual": num(c.max_residual),
        "points": c.points,
        "pass": c.pass,
    })
}

/// A report under construction: result fields first, then provenance,
/// checks and the overall verdict.
#[derive(Debug, Clone)]
pub struct Report {
    fields: Map<String, Value>,
    checks: Vec<Check>,
    structure: Option<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report {
            fields: Map::new(),
            checks: Vec::new(),
            structure: None,
        }
    }

    pub fn structure(&mut self, source: &str, text: &str) -> &mut Self {
        self.structure = Some((source.to_string(), fingerprint(text)));
        self
    }

    pub fn field(&mut self, key: &str, v: Value) -> &mut Self {
        self.fields.insert(key.to_string(), v);
        self
    }

    pub fn check(&mut self, c: Check) -> &mut Self {
        self.checks.push(c);
        self
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_value(&self) -> Value {
        let mut m = self.fields.clone();
        m.insert("tool".into(), json!(TOOL));
        if let Some((src, fp)) = &self.structure {
            m.insert("structure".into(), json!({ "source": src, "fingerprint": fp }));
        }
        m.insert("checks".into(), Value::Array(self.checks.iter().map(check).collect()));
        m.insert("pass".into(), json!(self.pass()));
        Value::Object(m)
    }

    /// Human-readable rendering for `--pretty`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            let text = match v {
                Value::String(s) => s.clone(),
                other => to_json(other),
            };
            out += &format!("{k:<22} {text}\n");
        }
        if let Some((src, fp)) = &self.structure {
            out += &format!("{:<22} {src} ({})\n", "structure", &fp[..12]);
        }
        if !self.checks.is_empty() {
            out += &format!("\n{:<26} {:>24} {:>8}  result\n", "check", "max_residual", "points");
            for c in &self.checks {
                let verdict = if c.pass { "PASS" } else { "FAIL" };
                out += &format!("{:<26} {:>24.16e} {:>8}  {verdict}\n", c.name, c.max_residual, c.points);
            }
        }
        out += &format!("\noverall: {}\n", if self.pass() { "PASS" } else { "FAIL" });
        out
    }
}

impl Default for Report {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_digits_and_round_trip() {
        let s = to_json(&json!({ "b": num(0.1), "a": num(-2.5e-300), "n": 3 }));
        assert_eq!(s, r#"{"b":1.0000000000000001e-1,"a":-2.5000000000000000e-300,"n":3}"#);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
        assert_eq!(to_json(&num(f64::NAN)), "null");
    }

    #[test]
    fn key_order_is_fixed() {
        let mut r = Report::new();
        r.field("dims", json!([4, 4, 4])).field("dim_i", json!(4));
        r.check(Check::new("x", 0.5, 1, 0.1));
        let s = to_json(&r.to_value());
        assert!(s.starts_with(r#"{"dims":[4,4,4],"dim_i":4,"tool":"#));
        assert!(s.ends_with(r#""pass":false}"#));
        assert!(r.to_table().contains("FAIL"));
    }

    #[test]
    fn fingerprint_is_sha256() {
        assert_eq!(
            fingerprint("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
