//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Every key below is accepted, anything else is an error. Lists
//! are comma-separated. `dump` writes every key, and loading the dump gives
//! back the same configuration.

use std::fmt::Write as _;
use std::path::Path;

use expl_core::ap::{ApParams, Preference};
use expl_core::eval::SweepParams;
use expl_core::library::LibraryParams;
use expl_core::recon::{MeshParams, ReconConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreferenceSetting {
    Median,
    Value(f64),
}

impl PreferenceSetting {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "median" => Ok(Self::Median),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Self::Value)
                .ok_or_else(|| format!("preference must be \"median\" or a number, got {v:?}")),
        }
    }

    fn render(self) -> String {
        match self {
            Self::Median => "median".into(),
            Self::Value(v) => v.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Ply,
    Obj,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Ply => "ply",
            Self::Obj => "obj",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Ball radius over the bounding diagonal. Unset: 0.05 when learning,
    /// the library's value when reconstructing.
    pub radius_rel: Option<f64>,
    pub samples_per_model: usize,
    pub moment_order: u32,
    pub damping: f64,
    pub preference: PreferenceSetting,
    pub max_iter: usize,
    pub k_candidates: usize,
    pub mse_tau: f64,
    /// MLS support radius over R.
    pub mls_h: f64,
    pub mls_iters: usize,
    pub grid_res: usize,
    pub iso_offset: f64,
    pub build_mesh: bool,
    pub mesh_format: MeshFormat,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub histogram_bins: usize,
    pub reference_samples: usize,
    pub sweep_count: usize,
    pub noise_levels: Vec<f64>,
    pub sampling_rates: Vec<f64>,
    pub sampling_noise: f64,
}

pub const DEFAULT_LEARN_RADIUS: f64 = 0.05;

impl Default for RunConfig {
    fn default() -> Self {
        let lib = LibraryParams::default();
        let ap = ApParams::default();
        let recon = ReconConfig::default();
        let sweep = SweepParams::default();
        Self {
            radius_rel: None,
            samples_per_model: lib.samples_per_model,
            moment_order: lib.moment_order,
            damping: ap.damping,
            preference: PreferenceSetting::Median,
            max_iter: ap.max_iter,
            k_candidates: recon.candidate_count,
            mse_tau: recon.mse_tau,
            mls_h: recon.mls_h_rel,
            mls_iters: recon.mls_iterations,
            grid_res: recon.mesh.grid_res,
            iso_offset: recon.mesh.iso_offset,
            build_mesh: recon.build_mesh,
            mesh_format: MeshFormat::Ply,
            seed: 0,
            threads: 0,
            histogram_bins: 20,
            reference_samples: sweep.reference_samples,
            sweep_count: sweep.full_count,
            noise_levels: sweep.noise_levels,
            sampling_rates: sweep.sampling_rates,
            sampling_noise: sweep.sampling_noise,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_num(key, x.trim())).collect()
}

fn render_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "radiusRel" => {
                self.radius_rel = if v == "auto" { None } else { Some(parse_num(key, v)?) };
            }
            "samplesPerModel" => self.samples_per_model = parse_num(key, v)?,
            "momentOrder" => self.moment_order = parse_num(key, v)?,
            "damping" => self.damping = parse_num(key, v)?,
            "preference" => self.preference = PreferenceSetting::parse(v)?,
            "maxIter" => self.max_iter = parse_num(key, v)?,
            "kCandidates" => self.k_candidates = parse_num(key, v)?,
            "mseTau" => self.mse_tau = parse_num(key, v)?,
            "mlsH" => self.mls_h = parse_num(key, v)?,
            "mlsIters" => self.mls_iters = parse_num(key, v)?,
            "gridRes" => self.grid_res = parse_num(key, v)?,
            "isoOffset" => self.iso_offset = parse_num(key, v)?,
            "buildMesh" => self.build_mesh = parse_num(key, v)?,
            "meshFormat" => {
                self.mesh_format = match v {
                    "ply" => MeshFormat::Ply,
                    "obj" => MeshFormat::Obj,
                    _ => return Err(format!("meshFormat must be ply or obj, got {v:?}")),
                }
            }
            "seed" => self.seed = parse_num(key, v)?,
            "threads" => self.threads = parse_num(key, v)?,
            "histogramBins" => self.histogram_bins = parse_num(key, v)?,
            "referenceSamples" => self.reference_samples = parse_num(key, v)?,
            "sweepCount" => self.sweep_count = parse_num(key, v)?,
            "noiseLevels" => self.noise_levels = parse_list(key, v)?,
            "samplingRates" => self.sampling_rates = parse_list(key, v)?,
            "samplingNoise" => self.sampling_noise = parse_num(key, v)?,
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            self.set(key.trim(), value).map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(cfg)
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a string");
        put("radiusRel", self.radius_rel.map_or("auto".into(), |r| r.to_string()));
        put("samplesPerModel", self.samples_per_model.to_string());
        put("momentOrder", self.moment_order.to_string());
        put("damping", self.damping.to_string());
        put("preference", self.preference.render());
        put("maxIter", self.max_iter.to_string());
        put("kCandidates", self.k_candidates.to_string());
        put("mseTau", self.mse_tau.to_string());
        put("mlsH", self.mls_h.to_string());
        put("mlsIters", self.mls_iters.to_string());
        put("gridRes", self.grid_res.to_string());
        put("isoOffset", self.iso_offset.to_string());
        put("buildMesh", self.build_mesh.to_string());
        put("meshFormat", self.mesh_format.extension().into());
        put("seed", self.seed.to_string());
        put("threads", self.threads.to_string());
        put("histogramBins", self.histogram_bins.to_string());
        put("referenceSamples", self.reference_samples.to_string());
        put("sweepCount", self.sweep_count.to_string());
        put("noiseLevels", render_list(&self.noise_levels));
        put("samplingRates", render_list(&self.sampling_rates));
        put("samplingNoise", self.sampling_noise.to_string());
        s
    }

    pub fn validate(&self) -> Result<(), String> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(msg) };
        if let Some(r) = self.radius_rel {
            check((0.05..=0.1).contains(&r), format!("radiusRel must lie in [0.05, 0.1], got {r}"))?;
        }
        check(self.samples_per_model >= 100, format!("samplesPerModel must be ≥ 100, got {}", self.samples_per_model))?;
        check((1..=8).contains(&self.moment_order), format!("momentOrder must lie in 1..=8, got {}", self.moment_order))?;
        check((0.0..1.0).contains(&self.damping), format!("damping must lie in [0, 1), got {}", self.damping))?;
        check(self.max_iter >= 1, "maxIter must be ≥ 1".into())?;
        check(self.k_candidates >= 1, "kCandidates must be ≥ 1".into())?;
        check(self.mse_tau > 0.0 && self.mse_tau.is_finite(), format!("mseTau must be positive, got {}", self.mse_tau))?;
        check(self.mls_h > 0.0 && self.mls_h.is_finite(), format!("mlsH must be positive, got {}", self.mls_h))?;
        check((8..=1024).contains(&self.grid_res), format!("gridRes must lie in 8..=1024, got {}", self.grid_res))?;
        check(self.iso_offset.is_finite(), "isoOffset must be finite".into())?;
        check(self.histogram_bins >= 1, "histogramBins must be ≥ 1".into())?;
        check(self.reference_samples >= 1, "referenceSamples must be ≥ 1".into())?;
        check(self.sweep_count >= 1, "sweepCount must be ≥ 1".into())?;
        check(
            self.noise_levels.iter().all(|&n| n >= 0.0 && n.is_finite()),
            "noiseLevels must be non-negative".into(),
        )?;
        check(
            self.sampling_rates.iter().all(|&r| r > 0.0 && r <= 1.0),
            "samplingRates must lie in (0, 1]".into(),
        )?;
        check(
            self.sampling_noise >= 0.0 && self.sampling_noise.is_finite(),
            "samplingNoise must be non-negative".into(),
        )
    }

    pub fn library_params(&self) -> LibraryParams {
        LibraryParams {
            radius_rel: self.radius_rel.unwrap_or(DEFAULT_LEARN_RADIUS),
            samples_per_model: self.samples_per_model,
            moment_order: self.moment_order,
            seed: self.seed,
            ..LibraryParams::default()
        }
    }

    pub fn ap_params(&self) -> ApParams {
        ApParams {
            damping: self.damping,
            max_iter: self.max_iter,
            ..ApParams::default()
        }
    }

    pub fn preference(&self) -> Preference {
        match self.preference {
            PreferenceSetting::Median => Preference::Median,
            PreferenceSetting::Value(v) => Preference::Shared(v),
        }
    }

    pub fn recon_config(&self) -> ReconConfig {
        ReconConfig {
            radius_rel: self.radius_rel,
            candidate_count: self.k_candidates,
            mse_tau: self.mse_tau,
            mls_h_rel: self.mls_h,
            mls_iterations: self.mls_iters,
            mesh: MeshParams {
                grid_res: self.grid_res,
                iso_offset: self.iso_offset,
            },
            build_mesh: self.build_mesh,
            ..ReconConfig::default()
        }
    }

    pub fn sweep_params(&self) -> SweepParams {
        SweepParams {
            noise_levels: self.noise_levels.clone(),
            sampling_rates: self.sampling_rates.clone(),
            full_count: self.sweep_count,
            sampling_noise: self.sampling_noise,
            reference_samples: self.reference_samples,
            seed: self.seed,
            recon: self.recon_config(),
            ..SweepParams::default()
        }
    }
}
