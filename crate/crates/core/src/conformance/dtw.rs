//! Dynamic time warping distance between sensor series.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DtwError {
    #[error("dtw requires non-empty series")]
    EmptySeries,
    #[error("band radius {radius} cannot align lengths {a} and {b}")]
    InfeasibleBand { radius: usize, a: usize, b: usize },
}

/// Sakoe-Chiba warping window. `Fraction` resolves the radius against the
/// second (reference) series length; `Radius` is absolute.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Band {
    Unbounded,
    Radius(usize),
    Fraction(f64),
}

impl Band {
    fn radius(&self, reference_len: usize) -> Option<usize> {
        match self {
            Band::Unbounded => None,
            Band::Radius(r) => Some(*r),
            Band::Fraction(f) => Some((f * reference_len as f64).ceil() as usize),
        }
    }
}

impl Serialize for Band {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Band::Unbounded => serializer.serialize_str("unbounded"),
            Band::Fraction(f) => serializer.serialize_f64(*f),
            Band::Radius(r) => serializer.serialize_u64(*r as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Band {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        match value {
            serde_json::Value::String(s) if s == "unbounded" => Ok(Band::Unbounded),
            serde_json::Value::Number(n) => {
                if let Some(u) = n.as_u64() {
                    if u > 1 {
                        return Ok(Band::Radius(u as usize));
                    }
                }
                let f = n
                    .as_f64()
                    .ok_or_else(|| D::Error::custom("bad band number"))?;
                Ok(Band::Fraction(f))
            }
            other => Err(D::Error::custom(format!(
                "dtw_band must be \"unbounded\", a fraction, or a radius, got {other}"
            ))),
        }
    }
}

fn znormalize(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 0.0 {
        xs.iter().map(|x| (x - mean) / sd).collect()
    } else {
        vec![0.0; xs.len()]
    }
}

/// Classic DTW with absolute-difference cell cost and the symmetric step
/// pattern (insert, delete, match):
/// `D[i][j] = |a_i - b_j| + min(D[i-1][j], D[i][j-1], D[i-1][j-1])`,
/// anchored at `D[0][0] = 0`; the distance is `D[len(a)][len(b)]`.
///
/// With a band, cells with `|i - j| > radius` are unreachable; the radius
/// must admit a path (`|len(a) - len(b)| <= radius`). Optional per-series
/// z-normalization is applied first. Memory is two rolling rows over the
/// shorter series.
pub fn dtw_distance(a: &[f64], b: &[f64], band: Band, normalize: bool) -> Result<f64, DtwError> {
    if a.is_empty() || b.is_empty() {
        return Err(DtwError::EmptySeries);
    }
    let radius = band.radius(b.len());
    if let Some(r) = radius {
        if a.len().abs_diff(b.len()) > r {
            return Err(DtwError::InfeasibleBand {
                radius: r,
                a: a.len(),
                b: b.len(),
            });
        }
    }
    let (a, b): (Vec<f64>, Vec<f64>) = if normalize {
        (znormalize(a), znormalize(b))
    } else {
        (a.to_vec(), b.to_vec())
    };
    // Orient so the inner dimension (row width) is the shorter series; cost
    // and |i-j| band are symmetric.
    let (outer, inner) = if a.len() >= b.len() {
        (&a, &b)
    } else {
        (&b, &a)
    };

    let width = inner.len() + 1;
    let mut prev = vec![f64::INFINITY; width];
    let mut curr = vec![f64::INFINITY; width];
    prev[0] = 0.0;
    for i in 1..=outer.len() {
        curr.fill(f64::INFINITY);
        let (lo, hi) = match radius {
            Some(r) => (i.saturating_sub(r).max(1), (i + r).min(inner.len())),
            None => (1, inner.len()),
        };
        for j in lo..=hi {
            let cost = (outer[i - 1] - inner[j - 1]).abs();
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[inner.len()])
}
