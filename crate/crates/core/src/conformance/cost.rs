//! Aggregate conformance cost for a part or case.

use super::{Deviation, DeviationKind};

/// The cost contribution of one deviation:
/// temporal — the excess over the threshold, `max(0, |z| - z_threshold)`;
/// sensor — the distance relative to its threshold, `score / dtw_threshold`;
/// control flow — 1 per unexpected move; model evolution — 1 per change.
pub fn deviation_weight(deviation: &Deviation) -> f64 {
    match deviation.kind {
        DeviationKind::TimeDuration | DeviationKind::TimeGap => {
            (deviation.score - deviation.threshold).max(0.0)
        }
        DeviationKind::SensorData => {
            if deviation.threshold > 0.0 {
                deviation.score / deviation.threshold
            } else {
                deviation.score
            }
        }
        DeviationKind::ControlFlow | DeviationKind::ModelEvolution => 1.0,
    }
}

/// Total cost of a part's (or case scope's) deviations. Costs never aggregate
/// across sibling parts: callers group deviations by (case, part) first.
pub fn trace_cost<'a>(deviations: impl IntoIterator<Item = &'a Deviation>) -> f64 {
    deviations
        .into_iter()
        .map(deviation_weight)
        .fold(0.0, |acc, w| acc + w)
}
