//! Scan consolidation and surface reconstruction from exemplar priors.

mod augment;
mod matching;
mod meshing;
mod mls;
mod neighborhood;

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

pub use augment::{augment, harmonize_orientations, INHERIT_REL};
pub use matching::{match_prior, refine_and_align, AlignParams, AlignedPrior, MatchResult};
pub use meshing::{reconstruct_mesh, MeshParams, OrientedImplicit};
pub use mls::{mls_project, mls_project_masked, MlsStats};
pub use neighborhood::{build_neighborhoods, Neighborhood};

use crate::error::{Error, Result};
use crate::geometry::{IcpParams, PointCloud, TriangleMesh};
use crate::library::PriorLibrary;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    /// Ball radius as a fraction of the scan's bounding diagonal; the
    /// library's own value when unset.
    pub radius_rel: Option<f64>,
    pub candidate_count: usize,
    /// Acceptance threshold on the alignment residual, as a fraction of R.
    pub mse_tau: f64,
    pub icp: IcpParams,
    /// MLS support radius as a fraction of R.
    pub mls_h_rel: f64,
    pub mls_iterations: usize,
    pub mesh: MeshParams,
    /// When false, stop after consolidation.
    pub build_mesh: bool,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            radius_rel: None,
            candidate_count: 5,
            mse_tau: 0.05,
            icp: IcpParams::default(),
            mls_h_rel: 0.5,
            mls_iterations: 2,
            mesh: MeshParams::default(),
            build_mesh: true,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if let Some(r) = self.radius_rel {
            if !(r > 0.0 && r <= 0.5) {
                return bad(format!("radius_rel must lie in (0, 0.5], got {r}"));
            }
        }
        if self.candidate_count == 0 {
            return bad("candidate count must be ≥ 1".into());
        }
        if !(self.mse_tau > 0.0) {
            return bad(format!("mse_tau must be positive, got {}", self.mse_tau));
        }
        if !(self.mls_h_rel > 0.0) {
            return bad(format!("MLS support must be positive, got {}", self.mls_h_rel));
        }
        if self.mesh.grid_res < 2 {
            return bad(format!("grid resolution must be ≥ 2, got {}", self.mesh.grid_res));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseMillis {
    pub neighborhoods: u64,
    pub matching: u64,
    pub augmentation: u64,
    pub mls: u64,
    pub meshing: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReconReport {
    pub neighborhoods: usize,
    pub accepted: usize,
    /// Neighborhoods whose best alignment missed the threshold, plus those
    /// where no candidate overlapped at all.
    pub rejected: usize,
    pub per_phase_millis: PhaseMillis,
    /// Mean residual over accepted matches.
    pub mean_mse: Option<f64>,
    pub radius: f64,
    pub mls: MlsReport,
    pub matches: Vec<MatchResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MlsReport {
    pub projected: usize,
    pub skipped: usize,
    pub isolated: usize,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub consolidated: PointCloud,
    /// `None` in consolidation-only mode or when meshing was impossible.
    pub mesh: Option<TriangleMesh>,
    pub report: ReconReport,
}

/// Consolidates `scan` with the library's exemplars and meshes the result:
/// neighborhoods, descriptor matching, ICP refinement, orientation
/// harmonization, augmentation, MLS projection, polygonization.
pub fn reconstruct(scan: &PointCloud, lib: &PriorLibrary, config: &ReconConfig) -> Result<Reconstruction> {
    config.validate()?;
    if lib.exemplar_ids().is_empty() {
        return Err(Error::NoExemplars);
    }
    let radius = config.radius_rel.unwrap_or(lib.radius_rel()) * scan.bounding_diagonal();
    if !(radius > 0.0) {
        return Err(Error::EmptyInput("scan has no spatial extent"));
    }
    let mut phases = PhaseMillis::default();

    let clock = Instant::now();
    let nbs = build_neighborhoods(scan, radius, lib.moment_order())?;
    phases.neighborhoods = millis(clock);

    let clock = Instant::now();
    let params = AlignParams {
        radius,
        mse_tau: config.mse_tau,
        icp: config.icp,
    };
    let outcomes: Vec<Result<Option<(MatchResult, AlignedPrior)>>> = nbs
        .par_iter()
        .map(|nb| {
            let candidates = match_prior(nb, lib, config.candidate_count)?;
            match refine_and_align(nb, scan, &candidates, lib, &params) {
                Ok(m) => Ok(Some(m)),
                Err(Error::MatchRejected) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut matches = Vec::new();
    let mut aligned = Vec::new();
    let mut unaligned = 0;
    for o in outcomes {
        match o? {
            Some((m, a)) => {
                if m.accepted {
                    aligned.push(a);
                }
                matches.push(m);
            }
            None => unaligned += 1,
        }
    }
    phases.matching = millis(clock);

    let accepted = aligned.len();
    let rejected = nbs.len() - accepted;
    info!("{} neighborhoods: {accepted} accepted, {rejected} rejected", nbs.len());
    if unaligned > 0 {
        warn!("{unaligned} neighborhoods had no overlapping candidate");
    }

    let clock = Instant::now();
    harmonize_orientations(&mut aligned, radius);
    let augmented = augment(scan, &aligned, radius);
    phases.augmentation = millis(clock);

    let clock = Instant::now();
    // aligned priors are already clean surface samples; only scan points move
    let movable: Vec<bool> = (0..augmented.len()).map(|i| i < scan.len()).collect();
    let (consolidated, stats) = mls_project_masked(&augmented, config.mls_h_rel * radius, config.mls_iterations, &movable)?;
    phases.mls = millis(clock);

    let clock = Instant::now();
    let mesh = if config.build_mesh {
        match reconstruct_mesh(&consolidated, &config.mesh) {
            Ok(m) => Some(m),
            Err(e @ (Error::CannotOrient | Error::EmptyInput(_))) => {
                warn!("meshing skipped ({e}); returning the consolidated cloud only");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    phases.meshing = millis(clock);

    let accepted_mse: Vec<f64> = matches.iter().filter(|m| m.accepted).map(|m| m.confidence_mse).collect();
    let mean_mse = (!accepted_mse.is_empty()).then(|| accepted_mse.iter().sum::<f64>() / accepted_mse.len() as f64);
    let report = ReconReport {
        neighborhoods: nbs.len(),
        accepted,
        rejected,
        per_phase_millis: phases,
        mean_mse,
        radius,
        mls: MlsReport {
            projected: stats.projected,
            skipped: stats.skipped,
            isolated: stats.isolated,
        },
        matches,
    };
    Ok(Reconstruction {
        consolidated,
        mesh,
        report,
    })
}

fn millis(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}
