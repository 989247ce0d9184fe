//! Bit-exact decimal formatting of doubles.
//!
//! Every `f64` written by this crate (JSON and CSV alike) uses 17 significant
//! digits in scientific notation, which is enough to round-trip any finite
//! IEEE-754 double exactly.

use serde::ser::{Error as _, SerializeSeq};
use serde::Serializer;
use serde_json::value::RawValue;

/// Format a double with 17 significant digits, e.g. `-1.2500000000000000e0`.
///
/// Non-finite values are written as `NaN`, `inf` or `-inf`; those are not
/// valid JSON and are rejected on load.
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn raw(x: f64) -> Result<Box<RawValue>, serde_json::Error> {
    RawValue::from_string(f17(x))
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return Err(S::Error::custom(format!("non-finite value {x}")));
    }
    let v = raw(*x).map_err(S::Error::custom)?;
    serde::Serialize::serialize(&v, s)
}

pub fn ser_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        if !x.is_finite() {
            return Err(S::Error::custom(format!("non-finite value {x}")));
        }
        seq.serialize_element(&raw(x).map_err(S::Error::custom)?)?;
    }
    seq.end()
}

pub fn ser_rows<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    struct Row<'a>(&'a [f64]);
    impl serde::Serialize for Row<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            ser_vec(self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for r in rows {
        seq.serialize_element(&Row(r))?;
    }
    seq.end()
}
