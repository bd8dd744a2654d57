//! Affinity propagation over descriptor similarities.

mod oracle;
mod run;

pub use oracle::{brute_force_exemplars, BruteForce};
pub use run::{ap_iterate, learn_exemplars, learn_exemplars_observed, run_ap, run_ap_observed, ApOutcome, ApParams, CsvTrace, Sweep};

use crate::error::{Error, Result};
use crate::library::Descriptor;

/// Preference policy for the diagonal of the similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Preference {
    /// Median of all off-diagonal similarities.
    Median,
    Shared(f64),
    PerPoint(Vec<f64>),
}

/// Dense message-passing state. Matrices are row-major `n × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityState {
    n: usize,
    s: Vec<f64>,
    r: Vec<f64>,
    a: Vec<f64>,
    assignments: Vec<usize>,
    evident: Vec<bool>,
    stable_iters: usize,
    iterations: usize,
    preferences_set: bool,
}

impl SimilarityState {
    /// Wraps a full similarity matrix; its diagonal is taken as the preferences.
    pub fn from_matrix(n: usize, s: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("similarity matrix with no points"));
        }
        if s.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("similarities must be finite".into()));
        }
        let mut state = Self::zeroed(n, s);
        state.preferences_set = true;
        Ok(state)
    }

    /// Clears messages and decisions; similarities and the sweep count stay.
    pub(crate) fn reset_messages(&mut self) {
        self.r.iter_mut().for_each(|v| *v = 0.0);
        self.a.iter_mut().for_each(|v| *v = 0.0);
        self.assignments = (0..self.n).collect();
        self.evident = vec![false; self.n];
        self.stable_iters = 0;
    }

    fn zeroed(n: usize, s: Vec<f64>) -> Self {
        Self {
            n,
            s,
            r: vec![0.0; n * n],
            a: vec![0.0; n * n],
            assignments: (0..n).collect(),
            evident: vec![false; n],
            stable_iters: 0,
            iterations: 0,
            preferences_set: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.n + j]
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.n + j]
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn similarities(&self) -> &[f64] {
        &self.s
    }

    pub fn responsibilities(&self) -> &[f64] {
        &self.r
    }

    pub fn availabilities(&self) -> &[f64] {
        &self.a
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Points with positive self-evidence `r(k,k) + a(k,k)` after the last sweep.
    pub fn evident(&self) -> &[bool] {
        &self.evident
    }

    /// Consecutive sweeps that left the assignments and the evident set
    /// unchanged.
    pub fn stable_iters(&self) -> usize {
        self.stable_iters
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn preferences(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.s(j, j)).collect()
    }

    pub fn set_preferences(&mut self, policy: &Preference) -> Result<()> {
        let n = self.n;
        let values = match policy {
            Preference::Median => vec![self.median_similarity(); n],
            Preference::Shared(p) => vec![*p; n],
            Preference::PerPoint(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: v.len(),
                    });
                }
                v.clone()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("preferences must be finite".into()));
        }
        for (j, p) in values.into_iter().enumerate() {
            self.s[j * n + j] = p;
        }
        self.preferences_set = true;
        Ok(())
    }

    /// Median of the off-diagonal entries (mean of the middle pair for an
    /// even count; zero when `n = 1`).
    pub fn median_similarity(&self) -> f64 {
        let n = self.n;
        let mut off: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.s[i * n + j])
            .collect();
        if off.is_empty() {
            return 0.0;
        }
        let m = off.len();
        let (_, hi, _) = off.select_nth_unstable_by(m / 2, f64::total_cmp);
        let hi = *hi;
        if m % 2 == 1 {
            return hi;
        }
        let lo = off[..m / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }

    pub(crate) fn preferences_set(&self) -> bool {
        self.preferences_set
    }
}

/// `s(i,j) = −‖V_i − V_j‖` off the diagonal; the diagonal waits for
/// [`SimilarityState::set_preferences`].
pub fn similarity_matrix<D: AsRef<[f64]> + Sync>(descriptors: &[D]) -> Result<SimilarityState> {
    use rayon::prelude::*;

    let n = descriptors.len();
    if n == 0 {
        return Err(Error::EmptyInput("similarity matrix with no descriptors"));
    }
    let dim = descriptors[0].as_ref().len();
    for d in descriptors {
        if d.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: d.as_ref().len(),
            });
        }
    }
    let mut s = vec![0.0; n * n];
    s.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let vi = descriptors[i].as_ref();
        for (j, slot) in row.iter_mut().enumerate() {
            if j != i {
                *slot = -crate::geometry::spatial::squared_distance(vi, descriptors[j].as_ref()).sqrt();
            }
        }
    });
    Ok(SimilarityState::zeroed(n, s))
}

impl AsRef<[f64]> for Descriptor {
    fn as_ref(&self) -> &[f64] {
        self.values()
    }
}
