//! Unit conversions used at the edges of the crate.

/// m³/s → ml/min.
pub const M3_PER_S_TO_ML_PER_MIN: f64 = 6.0e7;

pub fn ml_per_min(q_m3_per_s: f64) -> f64 {
    q_m3_per_s * M3_PER_S_TO_ML_PER_MIN
}

pub fn m3_per_s(q_ml_per_min: f64) -> f64 {
    q_ml_per_min / M3_PER_S_TO_ML_PER_MIN
}
