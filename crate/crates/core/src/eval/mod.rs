//! Reconstruction quality metrics, virtual scans and robustness sweeps.

mod descriptor_error;
mod hausdorff;
mod scan;
mod sweep;

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

pub use descriptor_error::{reconstruction_error, sample_reference, DescriptorError};
pub use hausdorff::{
    distances_to_mesh, hausdorff_histogram, hausdorff_histogram_symmetric, histogram_of, project_onto_mesh,
    HausdorffHistogram, HistogramBin, TriangleLocator,
};
pub use scan::{virtual_scan, VirtualScan};
pub use sweep::{robustness_sweep, write_sweep_csv, SweepKind, SweepParams, SweepRow};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorReport {
    pub eq4_error: Option<f64>,
    pub hausdorff_max: Option<f64>,
    pub histogram: Vec<HistogramBin>,
    pub runtime_millis: BTreeMap<String, u64>,
}

/// `binEdge,percent`, one line per bin.
pub fn write_histogram_csv<W: Write>(w: &mut W, bins: &[HistogramBin]) -> std::io::Result<()> {
    writeln!(w, "binEdge,percent")?;
    for b in bins {
        writeln!(w, "{:.9e},{:.6}", b.bin_edge, b.percent)?;
    }
    Ok(())
}
