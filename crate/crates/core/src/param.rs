//! System parameters: schemas, vectors, uniform randomization and error metrics.

use std::fmt;
use std::ops::Index;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every parameter after sampling or updates, in the
/// parameter's native unit.
pub const PARAM_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Dynamics,
    Visual,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::Dynamics => f.write_str("dynamics"),
            ParamKind::Visual => f.write_str("visual"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub kind: ParamKind,
    /// Used only when reporting.
    pub reference_scale: f64,
    pub unit: String,
}

/// Ordered set of parameter identifiers that every [`ParamVector`] indexes against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSchema {
    entries: Vec<ParamEntry>,
}

impl ParamSchema {
    pub fn new(entries: Vec<ParamEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParams(
                "schema must contain at least one parameter".into(),
            ));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.name.is_empty() {
                return Err(Error::InvalidParams(format!("parameter {i} has an empty name")));
            }
            if entries[..i].iter().any(|o| o.name == e.name) {
                return Err(Error::InvalidParams(format!("duplicate parameter name {:?}", e.name)));
            }
            if e.reference_scale.is_nan() || e.reference_scale <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "reference scale of {:?} must be positive",
                    e.name
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn name(&self, i: usize) -> &str {
        &self.entries[i].name
    }

    pub fn kind(&self, i: usize) -> ParamKind {
        self.entries[i].kind
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn dynamics_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.kind(i) == ParamKind::Dynamics)
            .collect()
    }

    pub fn validate(&self, v: &ParamVector) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::InvalidParams(format!(
                "expected {} parameters, got {}",
                self.len(),
                v.len()
            )));
        }
        Ok(())
    }
}

/// Strictly positive parameter values in schema order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParams("parameter vector is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "parameter {i} must be finite and strictly positive, got {v}"
            )));
        }
        Ok(Self(values))
    }

    /// Builds a vector, raising every entry to at least [`PARAM_FLOOR`].
    /// Non-finite entries are still rejected.
    pub fn floored(values: Vec<f64>) -> Result<Self> {
        Self::new(
            values
                .into_iter()
                .map(|v| if v.is_nan() { v } else { v.max(PARAM_FLOOR) })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Self {
        v.0
    }
}

/// Independent uniform distributions centred on `mean` with width
/// `range_fraction * mean` per parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDistribution {
    mean: ParamVector,
    range_fraction: f64,
}

impl ParamDistribution {
    pub fn new(mean: ParamVector, range_fraction: f64) -> Result<Self> {
        if !(range_fraction.is_finite() && range_fraction >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "range fraction must be finite and non-negative, got {range_fraction}"
            )));
        }
        Ok(Self { mean, range_fraction })
    }

    pub fn mean(&self) -> &ParamVector {
        &self.mean
    }

    pub fn range_fraction(&self) -> f64 {
        self.range_fraction
    }

    /// Support `[lo, hi]` of parameter `i`, clamped below at [`PARAM_FLOOR`].
    pub fn support(&self, i: usize) -> (f64, f64) {
        let m = self.mean[i];
        let half = 0.5 * self.range_fraction;
        ((m * (1.0 - half)).max(PARAM_FLOOR), (m * (1.0 + half)).max(PARAM_FLOOR))
    }

    pub fn contains(&self, v: &ParamVector) -> bool {
        v.len() == self.mean.len()
            && v.iter().enumerate().all(|(i, &x)| {
                let (lo, hi) = self.support(i);
                x >= lo && x <= hi
            })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let values = (0..self.mean.len())
            .map(|i| {
                let (lo, hi) = self.support(i);
                // Always consume one draw so streams stay aligned across widths.
                let u: f64 = rng.random();
                if hi > lo {
                    lo + u * (hi - lo)
                } else {
                    lo
                }
            })
            .collect();
        ParamVector(values)
    }
}

/// Element-wise `100 * |mean - real| / real`.
pub fn percent_error(mean: &ParamVector, real: &ParamVector) -> Result<Vec<f64>> {
    if mean.len() != real.len() {
        return Err(Error::InvalidParams(format!(
            "length mismatch: {} vs {}",
            mean.len(),
            real.len()
        )));
    }
    // ParamVector already guarantees positivity; checked again for raw callers.
    if real.iter().any(|&r| r.is_nan() || r <= 0.0) {
        return Err(Error::InvalidParams(
            "reference values must be strictly positive".into(),
        ));
    }
    Ok(mean
        .iter()
        .zip(real.iter())
        .map(|(m, r)| 100.0 * (m - r).abs() / r)
        .collect())
}

pub fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pairs of multiplicative factors used to build a deliberately wrong initial mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorPreset {
    #[serde(rename = "2x-0.5x")]
    Double,
    #[serde(rename = "4/3x-3/4x")]
    FourThirds,
    #[serde(rename = "3/2x-2/3x")]
    ThreeHalves,
}

impl FactorPreset {
    pub fn factors(self) -> (f64, f64) {
        match self {
            FactorPreset::Double => (2.0, 0.5),
            FactorPreset::FourThirds => (4.0 / 3.0, 0.75),
            FactorPreset::ThreeHalves => (1.5, 2.0 / 3.0),
        }
    }

    /// One fair coin per parameter between the high and low factor.
    pub fn draw<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Vec<f64> {
        let (hi, lo) = self.factors();
        (0..n).map(|_| if rng.random_bool(0.5) { hi } else { lo }).collect()
    }
}

impl fmt::Display for FactorPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorPreset::Double => "2x-0.5x",
            FactorPreset::FourThirds => "4/3x-3/4x",
            FactorPreset::ThreeHalves => "3/2x-2/3x",
        })
    }
}

/// Element-wise `real_i * factor_i`.
pub fn misparametrize(real: &ParamVector, factors: &[f64]) -> Result<ParamVector> {
    if factors.len() != real.len() {
        return Err(Error::InvalidParams(format!(
            "expected {} factors, got {}",
            real.len(),
            factors.len()
        )));
    }
    if factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::InvalidParams(
            "misparametrization factors must be positive".into(),
        ));
    }
    ParamVector::new(real.iter().zip(factors).map(|(r, f)| r * f).collect())
}
