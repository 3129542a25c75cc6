use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::deconv::io::{read_kernel, read_raster, write_atomic, write_kernel, write_pgm16};
use crate::deconv::{make_synthetic, solve_blind, solve_nonblind, ImageField, KernelField, NonblindOutput};
use crate::error::{FimaError, Result};
use crate::metrics::{error_rate, kernel_similarity, psnr, ssim};
use crate::solvers::Scheme;
use crate::trace::{to_csv_string, to_json_string, IterateTrace, StopReason};

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub command: &'static str,
    pub scheme: String,
    pub module: String,
    pub iterations: usize,
    pub accepts: usize,
    pub stop: Option<StopReason>,
    pub final_objective: Option<f64>,
    pub warnings: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub kernel_similarity: Option<f64>,
    pub error_rate: Option<f64>,
}

impl RunSummary {
    fn new(command: &'static str, scheme: &str, module: &str, trace: &IterateTrace) -> Self {
        Self {
            command,
            scheme: scheme.to_string(),
            module: module.to_string(),
            iterations: trace.iterations(),
            accepts: trace.accept_count(),
            stop: trace.stop,
            final_objective: trace.objectives().last().copied(),
            warnings: trace.warnings().count(),
            psnr: None,
            ssim: None,
            kernel_similarity: None,
            error_rate: None,
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| FimaError::InvalidArgument(format!("missing required `{key}`")))
}

fn read_image(path: &Path) -> Result<ImageField> {
    if !path.is_file() {
        return Err(FimaError::InvalidArgument(format!("no such image file {}", path.display())));
    }
    ImageField::new(read_raster(path)?)
}

fn read_kernel_file(path: &Path) -> Result<KernelField> {
    if !path.is_file() {
        return Err(FimaError::InvalidArgument(format!("no such kernel file {}", path.display())));
    }
    read_kernel(path)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| FimaError::InvalidArgument(format!("cannot create {}: {e}", dir.display())))
}

fn write_trace(dir: &Path, trace: &IterateTrace, timing: bool) -> Result<()> {
    let trace = if timing { trace.clone() } else { trace.without_timing() };
    let rows = trace.rows();
    write_atomic(&dir.join("trace.csv"), to_csv_string(&rows).as_bytes())?;
    write_atomic(&dir.join("trace.json"), to_json_string(&rows).as_bytes())
}

fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    let json = serde_json::to_string_pretty(summary).map_err(|e| FimaError::Parse(e.to_string()))?;
    write_atomic(&dir.join("metrics.json"), json.as_bytes())
}

/// Restores `input` with the known `kernel`.
///
/// Writes `restored.pgm`, `trace.csv`, `trace.json` and `metrics.json`
/// into `out`; PSNR/SSIM are reported when `truth` is given.
pub fn cmd_solve_nonblind(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let y = read_image(required(&cfg.input, "input")?)?;
    let kernel = read_kernel_file(required(&cfg.kernel, "kernel")?)?;
    let truth = cfg.truth.as_deref().map(read_image).transpose()?;
    let modules = cfg.module_choice(&cfg.module)?;
    prepare_out(&cfg.out)?;

    let out = solve_nonblind(&y, &kernel, cfg.scheme, &modules, &cfg.nonblind_options())?;
    let mut summary = RunSummary::new("solve-nonblind", cfg.scheme.name(), &cfg.module, &out.trace);
    if let Some(t) = &truth {
        summary.psnr = Some(psnr(&out.image, t, cfg.peak)?);
        summary.ssim = Some(ssim(&out.image, t, cfg.peak)?);
    }
    write_pgm16(&cfg.out.join("restored.pgm"), out.image.pixels())?;
    write_trace(&cfg.out, &out.trace, cfg.timing)?;
    write_summary(&cfg.out, &summary)?;
    Ok(summary)
}

/// Estimates the kernel of `input`.
///
/// Writes `kernel.txt`, `trace.csv`, `trace.json` and `metrics.json`;
/// with `recover = true` also `latent.pgm`, the non-blind restoration
/// with the estimated kernel. KS needs `kernel_truth`; ER needs
/// `recover`, `truth` and `kernel_truth`.
pub fn cmd_solve_blind(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let y = read_image(required(&cfg.input, "input")?)?;
    let truth = cfg.truth.as_deref().map(read_image).transpose()?;
    let kernel_truth = cfg.kernel_truth.as_deref().map(read_kernel_file).transpose()?;
    let denoiser = cfg.denoiser(&cfg.module)?;
    let modules = cfg.module_choice(&cfg.module)?;
    prepare_out(&cfg.out)?;

    let out = solve_blind(&y, denoiser, &cfg.blind_options())?;
    let mut summary = RunSummary::new("solve-blind", "mfima", &cfg.module, &out.trace);
    if let Some(kt) = &kernel_truth {
        summary.kernel_similarity = Some(kernel_similarity(&out.kernel, kt)?);
    }
    write_kernel(&cfg.out.join("kernel.txt"), &out.kernel)?;
    if cfg.recover {
        let opts = cfg.nonblind_options();
        let latent = solve_nonblind(&y, &out.kernel, cfg.scheme, &modules, &opts)?.image;
        if let Some(t) = &truth {
            summary.psnr = Some(psnr(&latent, t, cfg.peak)?);
            summary.ssim = Some(ssim(&latent, t, cfg.peak)?);
            if let Some(kt) = &kernel_truth {
                let reference = solve_nonblind(&y, kt, cfg.scheme, &modules, &opts)?.image;
                summary.error_rate = Some(error_rate(&latent, t, &reference)?);
            }
        }
        write_pgm16(&cfg.out.join("latent.pgm"), latent.pixels())?;
    }
    write_trace(&cfg.out, &out.trace, cfg.timing)?;
    write_summary(&cfg.out, &summary)?;
    Ok(summary)
}

/// Writes `z_true.pgm`, `y.pgm` and `b_true.txt`. PGM intensities are
/// clamped to `[0, 1]`.
pub fn cmd_make_synthetic(cfg: &ExperimentConfig) -> Result<()> {
    let inst = make_synthetic(cfg.seed, cfg.size, cfg.synthetic_kind()?, cfg.noise)?;
    prepare_out(&cfg.out)?;
    write_pgm16(&cfg.out.join("z_true.pgm"), inst.z_true.pixels())?;
    write_pgm16(&cfg.out.join("y.pgm"), inst.y.pixels())?;
    write_kernel(&cfg.out.join("b_true.txt"), &inst.b_true)
}

pub const BENCH_HEADER: [&str; 12] = [
    "scheme",
    "module",
    "status",
    "instances",
    "psnr",
    "ssim",
    "iterations",
    "accepts",
    "final_objective",
    "time_s",
    "trajectory_sha256",
    "error",
];

/// One row of `bench.csv`; metric columns are means over the instances.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scheme: Scheme,
    pub module: String,
    pub failed: Option<String>,
    pub instances: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub iterations: f64,
    pub accepts: f64,
    pub final_objective: f64,
    pub time_s: Option<f64>,
    /// SHA-256 over the bit patterns of every objective trajectory.
    pub digest: String,
}

impl BenchRow {
    fn record(&self) -> Vec<String> {
        let f = |v: f64| if self.failed.is_some() { String::new() } else { v.to_string() };
        vec![
            self.scheme.name().to_string(),
            self.module.clone(),
            if self.failed.is_some() { "failed" } else { "ok" }.to_string(),
            self.instances.to_string(),
            f(self.psnr),
            f(self.ssim),
            f(self.iterations),
            f(self.accepts),
            f(self.final_objective),
            self.time_s.map(|t| format!("{t:.3}")).unwrap_or_default(),
            self.digest.clone(),
            self.failed.clone().unwrap_or_default(),
        ]
    }
}

fn bench_cell(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    module: &str,
    instances: &[(ImageField, ImageField, KernelField)],
) -> BenchRow {
    let start = Instant::now();
    let mut row = BenchRow {
        scheme,
        module: module.to_string(),
        failed: None,
        instances: instances.len(),
        psnr: 0.0,
        ssim: 0.0,
        iterations: 0.0,
        accepts: 0.0,
        final_objective: 0.0,
        time_s: None,
        digest: String::new(),
    };
    let run = || -> Result<Vec<NonblindOutput>> {
        let choice = cfg.module_choice(module)?;
        let opts = cfg.nonblind_options();
        instances.iter().map(|(y, _, k)| solve_nonblind(y, k, scheme, &choice, &opts)).collect()
    };
    match run() {
        Ok(outputs) => {
            let n = outputs.len().max(1) as f64;
            let mut hasher = Sha256::new();
            for (i, (out, (_, z, _))) in outputs.iter().zip(instances).enumerate() {
                match (psnr(&out.image, z, cfg.peak), ssim(&out.image, z, cfg.peak)) {
                    (Ok(p), Ok(s)) => {
                        row.psnr += p / n;
                        row.ssim += s / n;
                    }
                    (Err(e), _) | (_, Err(e)) => row.failed = Some(e.to_string()),
                }
                row.iterations += out.trace.iterations() as f64 / n;
                row.accepts += out.trace.accept_count() as f64 / n;
                let objectives = out.trace.objectives();
                row.final_objective += objectives.last().copied().unwrap_or(f64::NAN) / n;
                hasher.update((i as u64).to_le_bytes());
                for v in objectives {
                    hasher.update(v.to_bits().to_le_bytes());
                }
            }
            row.digest = hasher.finalize().iter().fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            });
        }
        Err(e) => row.failed = Some(e.to_string().replace(['\n', '\r'], " ")),
    }
    if cfg.timing {
        row.time_s = Some(start.elapsed().as_secs_f64());
    }
    row
}

/// Runs every `(scheme, module)` cell of the matrix on `instances`
/// synthetic images (seeds `seed, seed + 1, ...`) and writes `bench.csv`.
///
/// Cells run in parallel; a failing cell is reported in its row and the
/// others continue.
pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let kind = cfg.synthetic_kind()?;
    prepare_out(&cfg.out)?;
    let cells: Vec<(Scheme, String)> =
        cfg.schemes.iter().flat_map(|s| cfg.modules.iter().map(move |m| (*s, m.clone()))).collect();
    let instances = if cells.is_empty() {
        Vec::new()
    } else {
        (0..cfg.instances as u64)
            .map(|i| make_synthetic(cfg.seed + i, cfg.size, kind, cfg.noise).map(|s| (s.y, s.z_true, s.b_true)))
            .collect::<Result<Vec<_>>>()?
    };
    let rows: Vec<BenchRow> = cells.par_iter().map(|(s, m)| bench_cell(cfg, *s, m, &instances)).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| FimaError::Io(std::io::Error::other(e));
    w.write_record(BENCH_HEADER).map_err(map)?;
    for r in &rows {
        w.write_record(r.record()).map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| FimaError::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(&cfg.out.join("bench.csv"), &bytes)?;
    Ok(rows)
}
