use std::io::Write;

use log::{info, warn};
use serde::Serialize;

use super::{hausdorff_histogram, project_onto_mesh, reconstruction_error, sample_reference, virtual_scan};
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::library::PriorLibrary;
use crate::recon::{reconstruct, ReconConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Noise,
    Sampling,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Noise => "noise",
            SweepKind::Sampling => "sampling",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    /// Noise sigma or sampling rate, as a fraction (of the diagonal, or of
    /// the full point count).
    pub level: f64,
    #[serde(rename = "type")]
    pub kind: SweepKind,
    pub eq4_error: Option<f64>,
    pub hausdorff_max: Option<f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub noise_levels: Vec<f64>,
    pub sampling_rates: Vec<f64>,
    /// Scan size at sampling rate 1.
    pub full_count: usize,
    /// Noise of the sampling sweep, fraction of the diagonal.
    pub sampling_noise: f64,
    /// Scan size of the noise sweep, as a sampling rate.
    pub noise_rate: f64,
    /// Samples of the ground truth used as the error reference.
    pub reference_samples: usize,
    pub seed: u64,
    pub recon: ReconConfig,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            noise_levels: vec![0.0, 0.0025, 0.005, 0.01, 0.02],
            sampling_rates: vec![1.0, 0.5, 0.25, 0.1, 0.05, 0.01],
            full_count: 20_000,
            sampling_noise: 0.0,
            noise_rate: 1.0,
            reference_samples: 20_000,
            seed: 0,
            recon: ReconConfig::default(),
        }
    }
}

/// Reconstructs virtual scans of `ground_truth` over a noise grid (fixed
/// sampling) and a sampling grid (fixed noise), scoring each with the
/// descriptor error between ground-truth samples and their closest points on
/// the reconstructed surface, and with the scan → mesh Hausdorff distance. A level that fails is recorded, not propagated.
pub fn robustness_sweep(ground_truth: &TriangleMesh, lib: &PriorLibrary, params: &SweepParams) -> Result<Vec<SweepRow>> {
    ground_truth.ensure_samplable()?;
    let reference = sample_reference(ground_truth, params.reference_samples, params.seed)?;
    let radius = params.recon.radius_rel.unwrap_or(lib.radius_rel()) * ground_truth.bounding_diagonal();
    let cells = params
        .noise_levels
        .iter()
        .map(|&n| (SweepKind::Noise, n, n, params.noise_rate))
        .chain(
            params
                .sampling_rates
                .iter()
                .map(|&r| (SweepKind::Sampling, r, params.sampling_noise, r)),
        );
    let mut rows = Vec::new();
    for (kind, level, noise, rate) in cells {
        let count = ((rate * params.full_count as f64).round() as usize).max(1);
        // one scan seed per axis, so levels differ only in noise or count
        let seed = params.seed.wrapping_add(if kind == SweepKind::Noise { 1 } else { 2 });
        let row = match score(ground_truth, lib, params, &reference, radius, count, noise, seed) {
            Ok((e, h)) => SweepRow {
                level,
                kind,
                eq4_error: Some(e),
                hausdorff_max: h,
                failed: false,
            },
            Err(err) => {
                warn!("{} level {level}: {err}", kind.as_str());
                SweepRow {
                    level,
                    kind,
                    eq4_error: None,
                    hausdorff_max: None,
                    failed: true,
                }
            }
        };
        info!("{} {level}: {:?} {:?}", kind.as_str(), row.eq4_error, row.hausdorff_max);
        rows.push(row);
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn score(
    ground_truth: &TriangleMesh,
    lib: &PriorLibrary,
    params: &SweepParams,
    reference: &crate::geometry::PointCloud,
    radius: f64,
    count: usize,
    noise: f64,
    seed: u64,
) -> Result<(f64, Option<f64>)> {
    let scan = virtual_scan(ground_truth, count, noise, 0.0, seed)?;
    let out = reconstruct(&scan.cloud, lib, &params.recon)?;
    let mesh = out
        .mesh
        .ok_or(Error::EmptyInput("reconstruction produced no surface"))?;
    // the reconstructed surface as seen from the ground-truth samples: an
    // exact reconstruction scores zero, free of resampling noise
    let surface = project_onto_mesh(reference, &mesh)?;
    let e = reconstruction_error(reference, &surface, radius, lib.moment_order())?;
    let h = hausdorff_histogram(&scan.cloud, &mesh, 1)?.hausdorff_max;
    Ok((e.total, Some(h)))
}

/// `level,type,eq4Error,hausdorffMax,failed`, one line per row; missing
/// values are left empty.
pub fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "level,type,eq4Error,hausdorffMax,failed")?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.9e}")).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.level,
            r.kind.as_str(),
            opt(r.eq4_error),
            opt(r.hausdorff_max),
            r.failed
        )?;
    }
    Ok(())
}
