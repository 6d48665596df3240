//! Serde helpers for fields that use NaN as an "undefined" sentinel.
//!
//! JSON has no NaN literal; serde_json writes non-finite floats as `null`.
//! These deserializers accept that `null` back as NaN so report files
//! round-trip.

use serde::{Deserialize, Deserializer};

pub(crate) fn f64_null_as_nan<'de, D>(deserializer: D) -> Result<f64, D::Error>
where
    D: Deserializer<'de>,
{
    Ok(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::NAN))
}

pub(crate) fn matrix_null_as_nan<'de, D>(deserializer: D) -> Result<Vec<Vec<f64>>, D::Error>
where
    D: Deserializer<'de>,
{
    let rows = Vec::<Vec<Option<f64>>>::deserialize(deserializer)?;
    Ok(rows
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect())
}
