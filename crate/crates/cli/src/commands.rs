use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use expl_core::ap::{learn_exemplars_observed, CsvTrace};
use expl_core::eval::{
    distances_to_mesh, histogram_of, project_onto_mesh, reconstruction_error, robustness_sweep, sample_reference,
    write_histogram_csv, write_sweep_csv, ErrorReport, SweepKind,
};
use expl_core::geometry::io::{list_mesh_files, read_cloud, read_mesh, write_cloud, write_mesh, PlyEncoding};
use expl_core::geometry::{FeatureLabel, PointCloud, SpatialIndex, TriangleMesh};
use expl_core::library::{build_library, load_library, save_library, PriorLibrary};
use expl_core::recon::reconstruct as run_reconstruction;
use expl_core::Error;
use log::{info, warn};
use serde::Serialize;

use crate::config::{RunConfig, DEFAULT_LEARN_RADIUS};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: String) -> Self {
        Self::new(2, message)
    }

    pub fn config(message: String) -> Self {
        Self::new(1, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoValidModels => 3,
            Error::NoExemplars => 4,
            Error::NothingToMatch => 5,
            Error::NoComparableRegions => 6,
            _ => 1,
        };
        Self::new(code, e.to_string())
    }
}

fn input_error(path: &Path, e: Error) -> Failure {
    Failure::new(2, format!("cannot read {}: {e}", path.display()))
}

fn open_library(path: &Path) -> Result<PriorLibrary, Failure> {
    load_library(path).map_err(|e| Failure::new(4, format!("cannot load library {}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn millis(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

pub fn learn(models: &Path, out: &Path, ap_trace: Option<&Path>, cfg: &RunConfig) -> Result<(), Failure> {
    let files = list_mesh_files(models).map_err(|e| input_error(models, e))?;
    if files.is_empty() {
        return Err(Failure::new(2, format!("{}: no .obj or .ply meshes", models.display())));
    }
    let t = Instant::now();
    let meshes: Vec<TriangleMesh> = files
        .iter()
        .filter_map(|f| match read_mesh(f) {
            Ok(m) => Some(m),
            Err(e) => {
                warn!("skipping {}: {e}", f.display());
                None
            }
        })
        .collect();
    if meshes.is_empty() {
        return Err(Error::NoValidModels.into());
    }
    let params = cfg.library_params();
    let (mut lib, stats) = build_library(&meshes, &params)?;
    let build_ms = millis(t);
    info!("library built from {} models in {build_ms} ms", stats.models_used);

    let t = Instant::now();
    let mut trace = ap_trace.map(|p| create(p).map(CsvTrace::new)).transpose()?;
    let outcome = learn_exemplars_observed(&mut lib, &cfg.ap_params(), &cfg.preference(), |s| {
        if let Some(t) = trace.as_mut() {
            t.record(s);
        }
    })?;
    if let Some(t) = trace {
        t.finish()
            .and_then(|mut w| w.flush())
            .map_err(|e| Failure::config(format!("AP trace: {e}")))?;
    }
    let ap_ms = millis(t);
    if !outcome.converged {
        warn!(
            "affinity propagation did not converge in {} sweeps; keeping the best exemplar set seen",
            outcome.iterations
        );
    }
    save_library(&lib, out).map_err(|e| Failure::config(format!("{}: {e}", out.display())))?;
    println!(
        "models {} (skipped {}), R {} x diagonal, n {} priors, k {} exemplars, {} sweeps{}, build {build_ms} ms, clustering {ap_ms} ms",
        stats.models_used,
        stats.models_skipped + (files.len() - meshes.len()),
        params.radius_rel,
        lib.len(),
        lib.exemplar_ids().len(),
        outcome.iterations,
        if outcome.converged { "" } else { " (not converged)" },
    );
    Ok(())
}

pub fn reconstruct(scan_path: &Path, library: &Path, prefix: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let lib = open_library(library)?;
    let scan = read_cloud(scan_path).map_err(|e| input_error(scan_path, e))?;
    let out = run_reconstruction(&scan, &lib, &cfg.recon_config())?;
    let r = &out.report;
    if r.rejected * 2 > r.neighborhoods {
        warn!("{} of {} neighborhoods rejected", r.rejected, r.neighborhoods);
    }
    let cloud_path = with_suffix(prefix, ".ply");
    write_cloud(&cloud_path, &out.consolidated, PlyEncoding::BinaryLittleEndian)
        .map_err(|e| Failure::config(format!("{}: {e}", cloud_path.display())))?;
    if let Some(mesh) = &out.mesh {
        let mesh_path = with_suffix(prefix, &format!("_mesh.{}", cfg.mesh_format.extension()));
        write_mesh(&mesh_path, mesh).map_err(|e| Failure::config(format!("{}: {e}", mesh_path.display())))?;
    }
    write_json(&with_suffix(prefix, "_report.json"), &out.report)?;
    println!(
        "neighborhoods {}, accepted {}, rejected {}, consolidated {} points{}",
        r.neighborhoods,
        r.accepted,
        r.rejected,
        out.consolidated.len(),
        match &out.mesh {
            Some(m) => format!(", mesh {} faces", m.faces().len()),
            None => ", no mesh".into(),
        }
    );
    Ok(())
}

/// A file read as a mesh when it has faces, else as a point cloud.
enum Shape {
    Mesh(TriangleMesh),
    Cloud(PointCloud),
}

fn read_shape(path: &Path) -> Result<Shape, Failure> {
    match read_mesh(path) {
        Ok(m) if !m.faces().is_empty() => Ok(Shape::Mesh(m)),
        _ => read_cloud(path).map(Shape::Cloud).map_err(|e| input_error(path, e)),
    }
}

fn bounding_diagonal(points: &[nalgebra::Point3<f64>]) -> f64 {
    expl_core::geometry::cloud::bounding_box(points).map_or(0.0, |(lo, hi)| (hi - lo).norm())
}

pub fn eval(original: &Path, reconstructed: &Path, out: Option<&Path>, cfg: &RunConfig) -> Result<(), Failure> {
    let orig = read_shape(original)?;
    let recon = read_shape(reconstructed)?;
    let mut runtime = BTreeMap::new();

    let t = Instant::now();
    let reference = match &orig {
        Shape::Mesh(m) => sample_reference(m, cfg.reference_samples, cfg.seed)?,
        Shape::Cloud(c) => c.clone(),
    };
    let diag = bounding_diagonal(reference.points());
    // a mesh is seen through the reference samples' closest points on it
    let compared = match &recon {
        Shape::Mesh(m) => project_onto_mesh(&reference, m)?,
        Shape::Cloud(c) => c.clone(),
    };
    let radius = cfg.radius_rel.unwrap_or(DEFAULT_LEARN_RADIUS) * diag;
    let desc_err = reconstruction_error(&reference, &compared, radius, cfg.moment_order)?;
    runtime.insert("descriptorError".to_string(), millis(t));

    let t = Instant::now();
    let mut distances = match &recon {
        Shape::Mesh(m) => distances_to_mesh(&reference, m)?,
        Shape::Cloud(c) => {
            let index = SpatialIndex::from_points(c.points());
            reference
                .points()
                .iter()
                .map(|p| index.nearest_point(p).map_or(f64::INFINITY, |(_, d)| d))
                .collect()
        }
    };
    // rounding noise of points that lie on the surface
    let floor = 1e-12 * diag;
    for d in &mut distances {
        if *d <= floor {
            *d = 0.0;
        }
    }
    let hist = histogram_of(&distances, cfg.histogram_bins);
    runtime.insert("hausdorff".to_string(), millis(t));

    let report = ErrorReport {
        eq4_error: Some(desc_err.total),
        hausdorff_max: Some(hist.hausdorff_max),
        histogram: hist.histogram,
        runtime_millis: runtime,
    };
    match out {
        Some(prefix) => {
            write_json(&with_suffix(prefix, ".json"), &report)?;
            let path = with_suffix(prefix, "_hist.csv");
            let mut w = create(&path)?;
            write_histogram_csv(&mut w, &report.histogram)
                .and_then(|_| w.flush())
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            println!(
                "eq4Error {:.6e} over {} seeds ({} penalized), hausdorffMax {:.6e}",
                desc_err.total, desc_err.seeds, desc_err.penalized, hist.hausdorff_max
            );
        }
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Failure::config(e.to_string()))?),
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SweepSummary {
    kind: &'static str,
    levels: usize,
    failed: usize,
    min_eq4_error: Option<f64>,
    max_eq4_error: Option<f64>,
    max_hausdorff: Option<f64>,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    rows: &'a [expl_core::eval::SweepRow],
    summary: Vec<SweepSummary>,
}

pub fn sweep(ground_truth: &Path, library: &Path, prefix: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let lib = open_library(library)?;
    let mesh = read_mesh(ground_truth).map_err(|e| input_error(ground_truth, e))?;
    let rows = robustness_sweep(&mesh, &lib, &cfg.sweep_params())?;

    let csv_path = with_suffix(prefix, ".csv");
    let mut w = create(&csv_path)?;
    write_sweep_csv(&mut w, &rows)
        .and_then(|_| w.flush())
        .map_err(|e| Failure::config(format!("{}: {e}", csv_path.display())))?;

    let summary: Vec<SweepSummary> = [SweepKind::Noise, SweepKind::Sampling]
        .into_iter()
        .map(|kind| {
            let of_kind: Vec<_> = rows.iter().filter(|r| r.kind == kind).collect();
            let errors: Vec<f64> = of_kind.iter().filter_map(|r| r.eq4_error).collect();
            let fold = |f: fn(f64, f64) -> f64| errors.iter().copied().reduce(f);
            SweepSummary {
                kind: kind.as_str(),
                levels: of_kind.len(),
                failed: of_kind.iter().filter(|r| r.failed).count(),
                min_eq4_error: fold(f64::min),
                max_eq4_error: fold(f64::max),
                max_hausdorff: of_kind.iter().filter_map(|r| r.hausdorff_max).reduce(f64::max),
            }
        })
        .collect();
    write_json(&with_suffix(prefix, ".json"), &SweepOutput { rows: &rows, summary })?;
    for r in &rows {
        println!(
            "{:<8} {:<8} eq4Error {:>14} hausdorffMax {:>14}{}",
            r.kind.as_str(),
            r.level,
            r.eq4_error.map_or("-".into(), |v| format!("{v:.6e}")),
            r.hausdorff_max.map_or("-".into(), |v| format!("{v:.6e}")),
            if r.failed { "  failed" } else { "" }
        );
    }
    Ok(())
}

pub fn inspect(library: &Path) -> Result<(), Failure> {
    let lib = open_library(library)?;
    println!("format         EXPL v{}", expl_core::library::format::VERSION);
    println!("radiusRel      {}", lib.radius_rel());
    println!("momentOrder    {}", lib.moment_order());
    println!("priors         {}", lib.len());
    println!("exemplars      {}", lib.exemplar_ids().len());
    let models: std::collections::BTreeSet<u64> = lib.priors().iter().map(|p| p.model_id).collect();
    println!("models         {}", models.len());
    if lib.exemplar_ids().is_empty() {
        return Ok(());
    }
    let sizes: Vec<usize> = lib.exemplars().map(|p| p.points.len()).collect();
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    println!(
        "exemplar size  min {} / mean {:.1} / max {} points",
        sizes.iter().min().unwrap(),
        mean,
        sizes.iter().max().unwrap()
    );
    let mut labels = BTreeMap::new();
    for p in lib.exemplars() {
        let has = |l: FeatureLabel| (0..p.points.len()).any(|i| p.points.label(i) == l);
        let kind = if has(FeatureLabel::Corner) {
            "corner"
        } else if has(FeatureLabel::Edge) {
            "edge"
        } else {
            "smooth"
        };
        *labels.entry(kind).or_insert(0usize) += 1;
    }
    let parts: Vec<String> = labels.iter().map(|(k, v)| format!("{k} {v}")).collect();
    println!("exemplar kinds {}", parts.join(", "));
    println!(
        "exemplar ids   {}",
        lib.exemplar_ids().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
    );
    Ok(())
}
