//! Spread metrics of projected timbre groups against the original speakers:
//! convex-hull containment, Mahalanobis distance, weighted 2D variance.

use serde::Serialize;

use crate::analysis::{AnalysisError, PcaModel};
use crate::codec::TimbreVector;

/// Boundary slack for containment tests, in projected units of signed
/// distance to a hull edge.
pub const HULL_SLACK: f64 = 1e-9;
/// Ridge added to the original-group covariance before inversion.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

pub type Point = (f64, f64);

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain convex hull, counter-clockwise, no duplicate endpoint.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let n = pts.len();
    if n <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * n);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt();
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0);
    let (px, py) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - px).powi(2) + (p.1 - py).powi(2)).sqrt()
}

/// Point-in-hull with boundary slack. Degenerate hulls (point or segment)
/// accept points within `slack` of them.
pub fn hull_contains(hull: &[Point], p: Point, slack: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => dist_to_segment(p, hull[0], hull[0]) <= slack,
        2 => dist_to_segment(p, hull[0], hull[1]) <= slack,
        n => {
            for i in 0..n {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                let edge_len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                if edge_len == 0.0 {
                    continue;
                }
                // Signed distance: positive inside a CCW hull.
                if cross(a, b, p) / edge_len < -slack {
                    return false;
                }
            }
            true
        }
    }
}

/// Mean and covariance (divisor n-1, plus ridge) of 2D points.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian2 {
    pub mean: Point,
    pub cov: [[f64; 2]; 2],
}

impl Gaussian2 {
    pub fn fit(points: &[Point], ridge: f64) -> Self {
        let n = points.len() as f64;
        let mean = (
            points.iter().map(|p| p.0).sum::<f64>() / n,
            points.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let mut cov = [[0.0f64; 2]; 2];
        if points.len() > 1 {
            for p in points {
                let dx = p.0 - mean.0;
                let dy = p.1 - mean.1;
                cov[0][0] += dx * dx;
                cov[0][1] += dx * dy;
                cov[1][0] += dy * dx;
                cov[1][1] += dy * dy;
            }
            let denom = n - 1.0;
            for row in &mut cov {
                for v in row.iter_mut() {
                    *v /= denom;
                }
            }
        }
        cov[0][0] += ridge;
        cov[1][1] += ridge;
        Gaussian2 { mean, cov }
    }

    pub fn mahalanobis(&self, p: Point) -> f64 {
        let det = self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0];
        let inv = [
            [self.cov[1][1] / det, -self.cov[0][1] / det],
            [-self.cov[1][0] / det, self.cov[0][0] / det],
        ];
        let dx = p.0 - self.mean.0;
        let dy = p.1 - self.mean.1;
        let q = dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy);
        q.max(0.0).sqrt()
    }
}

/// Spread statistics for one labeled group.
#[derive(Debug, Clone, Serialize)]
pub struct GroupSpread {
    pub name: String,
    pub count: usize,
    /// Explained-variance-weighted variance of the projected coordinates.
    pub weighted_variance: f64,
    /// Mean Mahalanobis distance to the original-group distribution.
    pub mean_mahalanobis: f64,
    /// Fraction of points inside the original group's convex hull.
    pub containment_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpreadReport {
    pub groups: Vec<GroupSpread>,
}

impl SpreadReport {
    pub fn group(&self, name: &str) -> Option<&GroupSpread> {
        self.groups.iter().find(|g| g.name == name)
    }
}

fn weighted_variance(points: &[Point], w1: f64, w2: f64) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mean = (
        points.iter().map(|p| p.0).sum::<f64>() / n,
        points.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let var1 = points.iter().map(|p| (p.0 - mean.0).powi(2)).sum::<f64>() / n;
    let var2 = points.iter().map(|p| (p.1 - mean.1).powi(2)).sum::<f64>() / n;
    if w1 + w2 == 0.0 {
        (var1 + var2) / 2.0
    } else {
        (w1 * var1 + w2 * var2) / (w1 + w2)
    }
}

/// Projects every group into the model's 2D plane and reports spread against
/// the group named `original`.
pub fn spread_report(
    model: &PcaModel,
    groups: &[(String, Vec<TimbreVector>)],
) -> Result<SpreadReport, AnalysisError> {
    let original = groups
        .iter()
        .find(|(name, _)| name == "original")
        .ok_or(AnalysisError::EmptyGroups)?;
    if original.1.len() < 3 {
        return Err(AnalysisError::TooFewVectors {
            needed: 3,
            got: original.1.len(),
        });
    }

    let to_points = |vectors: &[TimbreVector]| -> Result<Vec<Point>, AnalysisError> {
        vectors
            .iter()
            .map(|v| {
                let c = model.project(v)?;
                Ok((c[0], c[1]))
            })
            .collect()
    };

    let original_points = to_points(&original.1)?;
    let hull = convex_hull(&original_points);
    let gauss = Gaussian2::fit(&original_points, COVARIANCE_RIDGE);
    let w1 = model.explained_variance_ratio(0);
    let w2 = model.explained_variance_ratio(1);

    let mut out = Vec::with_capacity(groups.len());
    for (name, vectors) in groups {
        let points = to_points(vectors)?;
        let inside = points
            .iter()
            .filter(|&&p| hull_contains(&hull, p, HULL_SLACK))
            .count();
        let mean_mahalanobis = if points.is_empty() {
            0.0
        } else {
            points.iter().map(|&p| gauss.mahalanobis(p)).sum::<f64>() / points.len() as f64
        };
        out.push(GroupSpread {
            name: name.clone(),
            count: points.len(),
            weighted_variance: weighted_variance(&points, w1, w2),
            mean_mahalanobis,
            containment_fraction: if points.is_empty() {
                0.0
            } else {
                inside as f64 / points.len() as f64
            },
        });
    }
    Ok(SpreadReport { groups: out })
}
