use super::{metric_at, MetricSource, Sym2, Vector};
use crate::{Error, Result};

/// A `g`-orthonormal basis of the tangent space at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFrame {
    pub vectors: Vec<Vector>,
    /// Set when the first vector was seeded (typically `grad f / ‖grad f‖`).
    pub adapted: bool,
}

impl PointFrame {
    /// `max |g(E_i, E_j) − δ_ij|`.
    pub fn orthonormality_defect(&self, g: &Sym2) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(&(g * b)) - target).abs());
            }
        }
        worst
    }

    /// `Σ_i T(E_i, E_i)`.
    pub fn trace(&self, t: &Sym2) -> f64 {
        self.vectors.iter().map(|e| e.dot(&(t * e))).sum()
    }
}

/// Gram–Schmidt over the coordinate basis, optionally seeded with `first`.
pub fn orthonormal_frame(
    metric: &(impl MetricSource + ?Sized),
    p: &[f64],
    first: Option<&Vector>,
) -> Result<PointFrame> {
    let g = metric_at(metric, p)?.value;
    let m = g.nrows();
    let mut candidates: Vec<Vector> = Vec::with_capacity(m + 1);
    if let Some(v) = first {
        if v.len() != m || !(v.dot(&(&g * v)) > 1e-20) {
            return Err(Error::ZeroVector { point: p.to_vec() });
        }
        candidates.push(v.clone());
    }
    candidates.extend((0..m).map(|i| Vector::from_fn(m, |k, _| if k == i { 1.0 } else { 0.0 })));

    let mut vectors: Vec<Vector> = Vec::with_capacity(m);
    for c in candidates {
        if vectors.len() == m {
            break;
        }
        // two passes of modified Gram–Schmidt
        let mut v = c.clone();
        for _ in 0..2 {
            for e in &vectors {
                let proj = e.dot(&(&g * &v));
                v -= e * proj;
            }
        }
        let n2 = v.dot(&(&g * &v));
        let c2 = c.dot(&(&g * &c));
        if n2 > 1e-12 * c2 {
            vectors.push(v / n2.sqrt());
        }
    }
    Ok(PointFrame {
        vectors,
        adapted: first.is_some(),
    })
}
