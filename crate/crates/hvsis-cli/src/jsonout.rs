//! Deterministic JSON serialization: lexicographic key order (the default
//! `serde_json` map is a BTreeMap) and every float printed with 17
//! significant digits in scientific notation, so equal documents are equal
//! byte-for-byte.

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;
use std::io;

/// Compact formatter with scientific-notation floats; everything else
/// keeps the trait's compact defaults.
struct SciFloats;

impl Formatter for SciFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Renders a JSON document on one LF-terminated line.
pub fn to_line(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFloats);
    value
        .serialize(&mut ser)
        .expect("writing JSON to a Vec cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serialized JSON is UTF-8")
}

/// A finite float as a JSON value; report floats are finite by contract.
pub fn num(value: f64) -> Value {
    debug_assert!(value.is_finite(), "non-finite value in a JSON report");
    Value::from(value)
}

/// A complex number as the two-element array `[re, im]`.
pub fn complex(value: hvsis::Complex64) -> Value {
    Value::from(vec![num(value.re), num(value.im)])
}

/// A state triple as the three-element array `[x, y, z]`.
pub fn triple(a: f64, b: f64, c: f64) -> Value {
    Value::from(vec![num(a), num(b), num(c)])
}
