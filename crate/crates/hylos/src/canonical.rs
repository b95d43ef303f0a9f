//! Canonical serialization: deterministic key ordering, 17-significant-digit
//! numbers, and content digests over the canonical bytes.
//!
//! Every versioned file format in this crate is written through this module
//! so that digests, hash chains, and byte-identity checks are stable.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Serializes any value to canonical JSON text.
///
/// Object keys are sorted (serde_json's default map is ordered), floats are
/// written with 17 significant digits, integers verbatim.
pub fn to_canonical_string<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("canonical serialization cannot fail");
    let mut out = String::new();
    write_value(&v, &mut out);
    out
}

pub fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().expect("number is i64, u64 or f64");
                out.push_str(&format_float(f));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string escape"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key escape"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

/// 17 significant digits: exact round-trip for every finite f64.
pub fn format_float(f: f64) -> String {
    format!("{f:.16e}")
}

/// Hex sha256 of the canonical serialization of `value`.
pub fn digest_of<T: Serialize>(value: &T) -> String {
    digest_bytes(to_canonical_string(value).as_bytes())
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}
