//! Geometric-moment shape descriptors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Number of moments with `1 ≤ p+q+r ≤ order`, i.e. `C(order+3, 3) - 1`.
pub fn descriptor_len(order: u32) -> usize {
    let d = order as usize;
    (d + 1) * (d + 2) * (d + 3) / 6 - 1
}

/// Exponent triples in descriptor order: total degree ascending, then `p`
/// ascending, then `q` ascending. Starts at `(0,0,1), (0,1,0), (1,0,0)` and
/// ends at `(order,0,0)`.
pub fn exponents(order: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::with_capacity(descriptor_len(order));
    for total in 1..=order {
        for p in 0..=total {
            for q in 0..=(total - p) {
                out.push([p, q, total - p - q]);
            }
        }
    }
    out
}

/// Fixed-length moment vector of a canonical patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor(Vec<f64>);

impl Descriptor {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        crate::geometry::spatial::squared_distance(&self.0, &other.0).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `M_{p,q,r} = (1/N) Σ ω_i x_i^p y_i^q z_i^r` for every `1 ≤ p+q+r ≤ order`,
/// with the weights rescaled to average one. The patch is expected to be in
/// canonical placement.
pub fn moments_descriptor(patch: &PointCloud, order: u32) -> Result<Descriptor> {
    if patch.is_empty() {
        return Err(Error::EmptyInput("moment descriptor of an empty patch"));
    }
    if order == 0 {
        return Err(Error::InvalidParameter("moment order must be ≥ 1".into()));
    }
    let exps = exponents(order);
    let weights = patch.normalized_weights();
    let d = order as usize;
    let mut acc = vec![0.0; exps.len()];
    let mut pows = vec![[1.0f64; 3]; d + 1];
    for (p, w) in patch.points().iter().zip(&weights) {
        for k in 1..=d {
            for a in 0..3 {
                pows[k][a] = pows[k - 1][a] * p[a];
            }
        }
        for (slot, e) in acc.iter_mut().zip(&exps) {
            *slot += w * pows[e[0] as usize][0] * pows[e[1] as usize][1] * pows[e[2] as usize][2];
        }
    }
    let n = patch.len() as f64;
    Ok(Descriptor(acc.into_iter().map(|v| v / n).collect()))
}
