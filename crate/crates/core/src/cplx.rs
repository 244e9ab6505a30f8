//! Complex-number helpers shared across the crate.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex64;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: C64, b: C64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Integer power with exact handling of negative exponents.
#[inline]
pub fn ipow(base: C64, e: i32) -> C64 {
    if e == 0 {
        C64::new(1.0, 0.0)
    } else {
        base.powi(e)
    }
}

/// Parses `a+bi`, `a-bi`, `a`, `bi`, or `a,b`.
pub fn parse_complex(s: &str) -> Option<C64> {
    let s = s.trim().replace(' ', "");
    if let Some((re, im)) = s.split_once(',') {
        return Some(c(re.parse().ok()?, im.parse().ok()?));
    }
    if let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) {
        // split at the last sign that is not part of an exponent
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            if (bytes[idx] == b'+' || bytes[idx] == b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
                split = Some(idx);
                break;
            }
        }
        return match split {
            Some(idx) => {
                let re: f64 = body[..idx].parse().ok()?;
                let im_str = &body[idx..];
                let im: f64 = match im_str {
                    "+" => 1.0,
                    "-" => -1.0,
                    other => other.parse().ok()?,
                };
                Some(c(re, im))
            }
            None => {
                let im: f64 = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    other => other.parse().ok()?,
                };
                Some(c(0.0, im))
            }
        };
    }
    Some(c(s.parse().ok()?, 0.0))
}

/// Serde adapter storing a complex number as `[re, im]` with finite parts.
pub mod pair {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        if !re.is_finite() || !im.is_finite() {
            return Err(D::Error::custom("complex components must be finite"));
        }
        Ok(C64::new(re, im))
    }
}

/// Same as [`pair`] for vectors.
pub mod pair_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        raw.into_iter()
            .map(|[re, im]| {
                if re.is_finite() && im.is_finite() {
                    Ok(C64::new(re, im))
                } else {
                    Err(D::Error::custom("complex components must be finite"))
                }
            })
            .collect()
    }
}

/// JSON value `[re, im]` for ad-hoc report building.
pub fn to_json(z: C64) -> serde_json::Value {
    serde_json::json!([z.re, z.im])
}
