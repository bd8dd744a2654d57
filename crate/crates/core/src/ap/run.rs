use std::io::{self, Write};

use log::{debug, warn};
use rayon::prelude::*;

use super::{similarity_matrix, Preference, SimilarityState};
use crate::error::{Error, Result};
use crate::library::PriorLibrary;

#[derive(Debug, Clone, PartialEq)]
pub struct ApParams {
    pub damping: f64,
    pub max_iter: usize,
    /// Sweeps with unchanged assignments required to stop.
    pub stable_window: usize,
}

impl Default for ApParams {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iter: 1000,
            stable_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApOutcome {
    /// Ascending prior indices.
    pub exemplars: Vec<usize>,
    pub assignments: Vec<usize>,
    /// `Σ_i s(i, ĉ_i)`, exemplars contributing their preference.
    pub net_similarity: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// What an observer sees after each sweep.
#[derive(Debug)]
pub struct Sweep<'a> {
    pub iteration: usize,
    pub state: &'a SimilarityState,
}

/// Sweeps without convergence after which the messages restart from zero
/// with more damping. Lightly damped messages can oscillate forever on
/// near-duplicate points.
const ESCALATE_EVERY: usize = 100;
const DAMPING_STEP: f64 = 0.4;
const MAX_ESCALATED_DAMPING: f64 = 0.9;

fn check_damping(damping: f64) -> Result<()> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidParameter(format!("damping must lie in [0, 1), got {damping}")));
    }
    Ok(())
}

/// First index of the maximum and the largest value at any other index.
fn top_two(values: impl Iterator<Item = f64>) -> (usize, f64, f64) {
    let (mut best_j, mut best, mut second) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (j, v) in values.enumerate() {
        if v > best {
            second = best;
            best = v;
            best_j = j;
        } else if v > second {
            second = v;
        }
    }
    (best_j, best, second)
}

/// One damped sweep: responsibilities from the current availabilities, then
/// availabilities from the new responsibilities, then assignments.
pub fn ap_iterate(state: &mut SimilarityState, damping: f64) -> Result<()> {
    check_damping(damping)?;
    if !state.preferences_set() {
        return Err(Error::InvalidParameter("preferences are not set".into()));
    }
    let n = state.n;
    let keep = damping;
    let take = 1.0 - damping;

    {
        let (s, a) = (&state.s, &state.a);
        state.r.par_chunks_mut(n).enumerate().for_each(|(i, r_row)| {
            let s_row = &s[i * n..(i + 1) * n];
            let a_row = &a[i * n..(i + 1) * n];
            let (best_j, best, second) = top_two(s_row.iter().zip(a_row).map(|(s, a)| s + a));
            for j in 0..n {
                let competitor = if j == best_j { second } else { best };
                let fresh = if n == 1 { 0.0 } else { s_row[j] - competitor };
                r_row[j] = keep * r_row[j] + take * fresh;
            }
        });
    }

    // Σ_{i'≠j} max(0, r(i',j)) per column, accumulated in row order
    const BLOCK: usize = 64;
    let r = &state.r;
    let positive: Vec<f64> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .flat_map_iter(|b| {
            let cols = b * BLOCK..((b + 1) * BLOCK).min(n);
            let mut acc = vec![0.0; cols.len()];
            for i in 0..n {
                let row = &r[i * n..(i + 1) * n];
                for (k, j) in cols.clone().enumerate() {
                    if i != j {
                        acc[k] += row[j].max(0.0);
                    }
                }
            }
            acc
        })
        .collect();
    let diag_r: Vec<f64> = (0..n).map(|j| r[j * n + j]).collect();
    let r = &state.r;
    state.a.par_chunks_mut(n).enumerate().for_each(|(i, a_row)| {
        let r_row = &r[i * n..(i + 1) * n];
        for j in 0..n {
            let fresh = if i == j {
                positive[j]
            } else {
                (diag_r[j] + positive[j] - r_row[j].max(0.0)).min(0.0)
            };
            a_row[j] = keep * a_row[j] + take * fresh;
        }
    });

    let (r, a) = (&state.r, &state.a);
    let assignments: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = i * n..(i + 1) * n;
            top_two(r[row.clone()].iter().zip(&a[row]).map(|(r, a)| r + a)).0
        })
        .collect();
    let evident: Vec<bool> = (0..n).map(|k| r[k * n + k] + a[k * n + k] > 0.0).collect();
    if state.iterations > 0 && assignments == state.assignments && evident == state.evident {
        state.stable_iters += 1;
    } else {
        state.stable_iters = 0;
    }
    state.assignments = assignments;
    state.evident = evident;
    state.iterations += 1;
    Ok(())
}

pub fn run_ap(state: &mut SimilarityState, params: &ApParams) -> Result<ApOutcome> {
    run_ap_observed(state, params, |_| {})
}

/// Runs sweeps until the assignments survive `stable_window` consecutive
/// sweeps unchanged and every point is assigned to a self-assigned point, or
/// `max_iter` sweeps have run. The observer is called after every sweep.
///
/// The self-assigned points become exemplars; each cluster then hands its
/// exemplar role to the member with the best summed similarity, and every
/// non-exemplar is reassigned by raw similarity.
pub fn run_ap_observed(
    state: &mut SimilarityState,
    params: &ApParams,
    mut observer: impl FnMut(&Sweep),
) -> Result<ApOutcome> {
    check_damping(params.damping)?;
    if !state.preferences_set() {
        return Err(Error::InvalidParameter("preferences are not set".into()));
    }
    if params.stable_window == 0 {
        return Err(Error::InvalidParameter("stable window must be ≥ 1".into()));
    }
    let n = state.n;
    if n == 1 {
        return Ok(ApOutcome {
            exemplars: vec![0],
            assignments: vec![0],
            net_similarity: state.s(0, 0),
            iterations: 0,
            converged: true,
        });
    }
    let mut converged = false;
    let mut restarted = false;
    // best settled decisions seen so far, kept for restarted or unconverged runs
    let mut best: Option<Settled> = None;
    let consider = |state: &SimilarityState, candidate: Vec<usize>, best: &mut Option<Settled>| {
        if candidate.is_empty() || best.as_ref().is_some_and(|b| b.tried.contains(&candidate)) {
            return;
        }
        let settled = settle(state, &candidate);
        match best {
            Some(b) if settled.net <= b.net => b.tried.push(candidate),
            _ => {
                let mut tried = best.take().map(|b| b.tried).unwrap_or_default();
                tried.push(candidate);
                *best = Some(Settled { tried, ..settled });
            }
        }
    };
    let mut damping = params.damping;
    let mut sweeps = 0;
    while state.iterations < params.max_iter {
        if sweeps > 0 && sweeps % ESCALATE_EVERY == 0 && damping < MAX_ESCALATED_DAMPING {
            damping = (damping + DAMPING_STEP).min(MAX_ESCALATED_DAMPING);
            state.reset_messages();
            restarted = true;
            debug!("affinity propagation unconverged after {sweeps} sweeps, restarting with damping {damping}");
        }
        ap_iterate(state, damping)?;
        sweeps += 1;
        observer(&Sweep {
            iteration: state.iterations,
            state,
        });
        if state.stable_iters >= params.stable_window && decisions_consistent(state) {
            converged = true;
            break;
        }
        consider(state, self_assigned(&state.assignments), &mut best);
        consider(state, (0..n).filter(|&k| state.evident[k]).collect(), &mut best);
    }

    let mut exemplars = self_assigned(&state.assignments);
    if exemplars.is_empty() {
        let j = top_two((0..n).map(|j| state.a(j, j) + state.r(j, j))).0;
        exemplars.push(j);
    }
    let mut result = settle(state, &exemplars);
    if !converged {
        warn!(
            "affinity propagation did not converge in {} iterations; keeping the best decisions seen",
            params.max_iter
        );
    }
    if !converged || restarted {
        if let Some(b) = best {
            if b.net > result.net {
                result = b;
            }
        }
    }
    let Settled {
        exemplars,
        assignments,
        net: net_similarity,
        ..
    } = result;
    debug!(
        "affinity propagation: {} exemplars after {} sweeps, net similarity {net_similarity}",
        exemplars.len(),
        state.iterations
    );
    Ok(ApOutcome {
        exemplars,
        assignments,
        net_similarity,
        iterations: state.iterations,
        converged,
    })
}

struct Settled {
    exemplars: Vec<usize>,
    assignments: Vec<usize>,
    net: f64,
    /// Raw decision sets already evaluated.
    tried: Vec<Vec<usize>>,
}

/// Refined exemplars, assignments and net similarity for a decision set.
fn settle(state: &SimilarityState, exemplars: &[usize]) -> Settled {
    let first = assign_to_exemplars(state, exemplars);
    let exemplars = refine_exemplars(state, exemplars, &first);
    let assignments = assign_to_exemplars(state, &exemplars);
    let net = net_similarity(state, &assignments);
    Settled {
        exemplars,
        assignments,
        net,
        tried: Vec::new(),
    }
}

/// Within each cluster, the member with the largest summed similarity from
/// the rest of the cluster (its own preference included) becomes the exemplar.
fn refine_exemplars(state: &SimilarityState, exemplars: &[usize], assignments: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = exemplars
        .iter()
        .map(|&e| {
            let members: Vec<usize> = (0..state.n).filter(|&i| assignments[i] == e).collect();
            let k = top_two(members.iter().map(|&j| members.iter().map(|&i| state.s(i, j)).sum::<f64>())).0;
            members[k]
        })
        .collect();
    out.sort_unstable();
    out
}

fn self_assigned(assignments: &[usize]) -> Vec<usize> {
    (0..assignments.len()).filter(|&j| assignments[j] == j).collect()
}

fn net_similarity(state: &SimilarityState, assignments: &[usize]) -> f64 {
    assignments.iter().enumerate().map(|(i, &c)| state.s(i, c)).sum()
}

/// Every point points at a self-assigned point, and the self-assigned points
/// are exactly those with positive self-evidence. Argmax decisions alone can
/// sit still on an all-exemplar solution while the evidence oscillates.
fn decisions_consistent(state: &SimilarityState) -> bool {
    let c = &state.assignments;
    c.iter().all(|&k| c[k] == k) && (0..c.len()).all(|k| state.evident[k] == (c[k] == k))
}

/// Exemplars map to themselves; every other point goes to the exemplar with
/// the largest similarity, smallest index on ties.
pub(crate) fn assign_to_exemplars(state: &SimilarityState, exemplars: &[usize]) -> Vec<usize> {
    let mut is_exemplar = vec![false; state.n];
    for &e in exemplars {
        is_exemplar[e] = true;
    }
    (0..state.n)
        .map(|i| {
            if is_exemplar[i] {
                return i;
            }
            let k = top_two(exemplars.iter().map(|&e| state.s(i, e))).0;
            exemplars[k]
        })
        .collect()
}

/// Clusters the library's descriptors and stores the chosen exemplars.
pub fn learn_exemplars(lib: &mut PriorLibrary, params: &ApParams, preference: &Preference) -> Result<ApOutcome> {
    learn_exemplars_observed(lib, params, preference, |_| {})
}

/// As [`learn_exemplars`], handing every sweep to `observer`.
pub fn learn_exemplars_observed(
    lib: &mut PriorLibrary,
    params: &ApParams,
    preference: &Preference,
    observer: impl FnMut(&Sweep),
) -> Result<ApOutcome> {
    if lib.is_empty() {
        return Err(Error::EmptyInput("library has no priors"));
    }
    let mut state = similarity_matrix(&lib.descriptors())?;
    state.set_preferences(preference)?;
    let outcome = run_ap_observed(&mut state, params, observer)?;
    lib.set_exemplars(outcome.exemplars.iter().map(|&e| e as u64).collect())?;
    Ok(outcome)
}

/// Per-sweep message dump: `iter,i,j,r,a`, one row per matrix entry.
pub struct CsvTrace<W: Write> {
    out: W,
    error: Option<io::Error>,
    header_written: bool,
}

impl<W: Write> CsvTrace<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            error: None,
            header_written: false,
        }
    }

    pub fn record(&mut self, sweep: &Sweep) {
        if self.error.is_none() {
            if let Err(e) = self.write_sweep(sweep) {
                self.error = Some(e);
            }
        }
    }

    fn write_sweep(&mut self, sweep: &Sweep) -> io::Result<()> {
        if !self.header_written {
            writeln!(self.out, "iter,i,j,r,a")?;
            self.header_written = true;
        }
        let st = sweep.state;
        for i in 0..st.n() {
            for j in 0..st.n() {
                writeln!(self.out, "{},{i},{j},{},{}", sweep.iteration, st.r(i, j), st.a(i, j))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}
