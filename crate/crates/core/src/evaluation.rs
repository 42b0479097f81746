//! Query-level metrics: QwP, L2, angle, Succ* and Succ.
//!
//! A query is *posed* when both its query frame and at least one response
//! track frame have a camera pose. Only posed queries can succeed, so Succ is
//! bounded by QwP.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::Vec3;
use crate::localization::{QueryResult, VisualQuery};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluationError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("schema error: {0}")]
    Schema(String),
}

pub fn l2_error(pred: &Vec3, gt: &Vec3) -> f64 {
    (pred - gt).norm()
}

/// Angle between two non-zero vectors, in `[0, pi]`.
pub fn angular_error(pred: &Vec3, gt: &Vec3) -> Result<f64, EvaluationError> {
    let (np, ng) = (pred.norm(), gt.norm());
    if np == 0.0 || ng == 0.0 {
        return Err(EvaluationError::Domain("angle with a zero vector"));
    }
    let c = (pred.dot(gt) / (np * ng)).clamp(-1.0, 1.0);
    Ok(libm::acos(c))
}

/// Coordinate system in which predictions are compared to ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Space {
    World,
    #[default]
    QueryFrame,
}

/// Success thresholds. The shipped defaults are placeholders, not the
/// challenge server's values.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct MetricThresholds {
    /// Meters.
    pub l2_max: f64,
    /// Radians.
    pub angle_max: f64,
    pub space: Space,
}

impl Default for MetricThresholds {
    fn default() -> Self {
        Self { l2_max: 6.0, angle_max: 0.52, space: Space::QueryFrame }
    }
}

impl MetricThresholds {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        if !(self.l2_max > 0.0 && self.angle_max > 0.0) {
            return Err(EvaluationError::Domain("thresholds must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct QueryRow {
    pub query_id: String,
    pub has_pose: bool,
    pub l2: Option<f64>,
    pub angle: Option<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct EvaluationSummary {
    pub n_queries: usize,
    pub n_posed: usize,
    pub n_success: usize,
    pub qwp: f64,
    pub succ: f64,
    pub succ_star: f64,
    /// Over posed queries; `None` when none is posed.
    pub mean_l2: Option<f64>,
    /// Over posed queries with a defined angle.
    pub mean_angle: Option<f64>,
    pub thresholds: MetricThresholds,
    pub rows: Vec<QueryRow>,
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl EvaluationSummary {
    /// Recomputes the aggregate fields from per-query rows.
    pub fn from_rows(rows: Vec<QueryRow>, thresholds: MetricThresholds) -> Self {
        let n_queries = rows.len();
        let n_posed = rows.iter().filter(|r| r.has_pose).count();
        let n_success = rows.iter().filter(|r| r.success).count();
        let mean_l2 = mean(rows.iter().filter(|r| r.has_pose).filter_map(|r| r.l2));
        let mean_angle = mean(rows.iter().filter(|r| r.has_pose).filter_map(|r| r.angle));
        Self {
            n_queries,
            n_posed,
            n_success,
            qwp: fraction(n_posed, n_queries),
            succ: fraction(n_success, n_queries),
            succ_star: fraction(n_success, n_posed),
            mean_l2,
            mean_angle,
            thresholds,
            rows,
        }
    }
}

fn score(result: &QueryResult, query: &VisualQuery, thresholds: &MetricThresholds) -> Result<QueryRow, EvaluationError> {
    let unposed = QueryRow { query_id: query.query_id.clone(), has_pose: false, l2: None, angle: None, success: false };
    if !result.has_pose {
        return Ok(unposed);
    }
    let missing = |what: &str| EvaluationError::Schema(format!("posed result {} lacks {what}", result.query_id));
    let (pred, gt) = match thresholds.space {
        Space::World => (result.pred_vec_world.ok_or_else(|| missing("pred_vec_world"))?, query.gt_world),
        Space::QueryFrame => (
            result.pred_vec_q.ok_or_else(|| missing("pred_vec_q"))?,
            result.gt_vec_q.ok_or_else(|| missing("gt_vec_q"))?,
        ),
    };
    let l2 = l2_error(&pred, &gt);
    let angle = angular_error(&pred, &gt).ok();
    let success = l2 <= thresholds.l2_max && angle.is_some_and(|a| a <= thresholds.angle_max);
    Ok(QueryRow { has_pose: true, l2: Some(l2), angle, success, ..unposed })
}

/// Scores every query. Results are matched to queries by id; rows follow the
/// order of `queries`.
pub fn evaluate(
    results: &[QueryResult],
    queries: &[VisualQuery],
    thresholds: &MetricThresholds,
) -> Result<EvaluationSummary, EvaluationError> {
    thresholds.validate()?;
    let mut by_id: BTreeMap<&str, &QueryResult> = BTreeMap::new();
    for r in results {
        if by_id.insert(&r.query_id, r).is_some() {
            return Err(EvaluationError::Schema(format!("duplicate result for query {}", r.query_id)));
        }
    }
    if results.len() != queries.len() {
        return Err(EvaluationError::Schema(format!("{} results for {} queries", results.len(), queries.len())));
    }
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        let r = by_id
            .get(q.query_id.as_str())
            .ok_or_else(|| EvaluationError::Schema(format!("no result for query {}", q.query_id)))?;
        rows.push(score(r, q, thresholds)?);
    }
    Ok(EvaluationSummary::from_rows(rows, *thresholds))
}

/// Percentage with two decimals, e.g. `0.0871 -> "8.71"`.
pub fn percent(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}
