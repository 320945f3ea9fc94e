use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use lvpat_core::extension::{
    build_training_set, extend, load_model, save_model, stitch, train, zero_extend, ExtensionModel,
};
use lvpat_core::forward::{simulate_wave_data, Part, WaveData};
use lvpat_core::geometry::{BoundaryGeometry, BoundarySplit};
use lvpat_core::inversion::reconstruct;
use lvpat_core::io::{
    export_csv, export_pgm, export_wave_pgm, load_image, load_wave_data, save_image, save_wave_data,
};
use lvpat_core::metrics::{e2_error, subspace_distance, ErrorReport};
use lvpat_core::phantoms::{rasterize, training_partition, ImageField, Phantom};

use crate::config::ExperimentConfig;
use crate::CliError;

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

fn partition_name(p: [usize; 2]) -> String {
    format!("learned_{}x{}", p[0], p[1])
}

/// Simulates `part` data of `phantom` and writes `wave_<part>.patb`.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    phantom: &Phantom,
    part: Part,
    out: &Path,
) -> Result<PathBuf, CliError> {
    ensure_dir(out)?;
    let (geom, split) = cfg.geometry()?;
    let data = simulate_wave_data(phantom, &geom, &split, part)?;
    let path = out.join(format!("wave_{}.patb", part.as_str()));
    save_wave_data(&data, &path)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub partition: [usize; 2],
    pub n: usize,
    /// Wall time for simulating the training traces and factorizing the Gram
    /// matrix.
    pub seconds: f64,
    pub ridge: f64,
    pub path: Option<PathBuf>,
}

fn train_partition(
    cfg: &ExperimentConfig,
    geom: &BoundaryGeometry,
    split: &BoundarySplit,
    partition: [usize; 2],
) -> Result<(ExtensionModel, f64), CliError> {
    let start = Instant::now();
    let phantoms = training_partition(cfg.k_box()?, partition[0], partition[1])?;
    let ts = build_training_set(&phantoms, geom, split)?;
    let model = train(ts, cfg.ridge_policy())?;
    let seconds = start.elapsed().as_secs_f64();
    info!(
        "trained {}x{} (n = {}) in {seconds:.2} s, ridge {:e}",
        partition[0],
        partition[1],
        model.training.len(),
        model.ridge()
    );
    Ok((model, seconds))
}

/// Trains one model per configured partition and writes
/// `model_<nw>x<nh>.patb` for each.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<TrainReport>, CliError> {
    ensure_dir(out)?;
    let (geom, split) = cfg.geometry()?;
    let mut reports = Vec::new();
    for &p in &cfg.training.partitions {
        let (model, seconds) = train_partition(cfg, &geom, &split, p)?;
        let path = out.join(format!("model_{}x{}.patb", p[0], p[1]));
        save_model(&model, &path)?;
        reports.push(TrainReport {
            partition: p,
            n: p[0] * p[1],
            seconds,
            ridge: model.ridge(),
            path: Some(path),
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendReport {
    pub seconds: f64,
    pub gamma2_path: PathBuf,
    pub full_path: PathBuf,
}

/// Extends Γ₁ data (or the Γ₁ part of full data) with a stored model.
pub fn cmd_extend(
    cfg: &ExperimentConfig,
    model_path: &Path,
    data_path: &Path,
    out: &Path,
) -> Result<ExtendReport, CliError> {
    ensure_dir(out)?;
    let (geom, split) = cfg.geometry()?;
    let model = load_model(model_path, &geom, &split)?;
    let data = load_wave_data(data_path)?;
    let u1 = match data.part {
        Part::Gamma1 => data,
        Part::Full => data.restrict(&split, Part::Gamma1)?,
        Part::Gamma2 => {
            return Err(CliError::Config(
                "extension input must contain the observed part".into(),
            ))
        }
    };
    let start = Instant::now();
    let u2 = extend(&model, &u1)?;
    let seconds = start.elapsed().as_secs_f64();
    let full = stitch(&u1, &u2, &geom, &split)?;
    let gamma2_path = out.join("extended_gamma2.patb");
    let full_path = out.join("extended_full.patb");
    save_wave_data(&u2, &gamma2_path)?;
    save_wave_data(&full, &full_path)?;
    Ok(ExtendReport {
        seconds,
        gamma2_path,
        full_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructReport {
    pub seconds: f64,
    pub image_path: PathBuf,
    pub pgm_path: PathBuf,
}

/// Back-projects full data; writes `<stem>_image.patb` and a PGM next to it.
pub fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    data_path: &Path,
    out: &Path,
) -> Result<ReconstructReport, CliError> {
    ensure_dir(out)?;
    let (geom, split) = cfg.geometry()?;
    let data = load_wave_data(data_path)?;
    let data = match data.part {
        Part::Full => data,
        Part::Gamma1 => {
            warn!("reconstructing limited data with zero extension");
            zero_extend(&data, &geom, &split)?
        }
        Part::Gamma2 => {
            return Err(CliError::Config(
                "cannot reconstruct from unobserved-part data alone".into(),
            ))
        }
    };
    let start = Instant::now();
    let image = reconstruct(&data, &geom, cfg.grid_spec()?)?;
    let seconds = start.elapsed().as_secs_f64();
    let stem = data_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("data");
    let image_path = out.join(format!("{stem}_image.patb"));
    let pgm_path = out.join(format!("{stem}_image.pgm"));
    save_image(&image, &image_path)?;
    let [lo, hi] = cfg.output.image_range;
    export_pgm(&image, lo, hi, &pgm_path)?;
    Ok(ReconstructReport {
        seconds,
        image_path,
        pgm_path,
    })
}

/// Variant name and training size encoded in a file stem such as
/// `recon_zero` or `data_learned_8x4_image`; unrecognized names count as
/// full-view.
fn variant_of(stem: &str) -> (String, Option<usize>) {
    let name = stem
        .strip_prefix("recon_")
        .or_else(|| stem.strip_prefix("data_"))
        .unwrap_or(stem);
    let name = name.strip_suffix("_image").unwrap_or(name).to_string();
    if name == "zero" {
        return (name, Some(0));
    }
    if let Some(rest) = name.strip_prefix("learned_") {
        if let Some((w, h)) = rest.split_once('x') {
            if let (Ok(w), Ok(h)) = (w.parse::<usize>(), h.parse::<usize>()) {
                return (name, Some(w * h));
            }
        }
    }
    (name, None)
}

/// Scores stored reconstructions against `truth`; writes `errors.csv`.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    recon_paths: &[PathBuf],
    truth: &Phantom,
    out: &Path,
) -> Result<ErrorReport, CliError> {
    ensure_dir(out)?;
    let (geom, _) = cfg.geometry()?;
    let grid = cfg.grid_spec()?;
    let reference = rasterize(truth, grid, &geom.domain);
    let mut report = ErrorReport::default();
    for path in recon_paths {
        let image = load_image(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("recon");
        let (name, n) = variant_of(stem);
        report.add_variant(&name, n, e2_error(&image, &reference)?);
        if let Some(n) = n {
            report
                .e_n
                .insert(n, approximation_factor(cfg, truth, n, &geom)?);
        }
    }
    report.validate()?;
    export_csv(&report, out.join("errors.csv"))?;
    Ok(report)
}

fn approximation_factor(
    cfg: &ExperimentConfig,
    f: &Phantom,
    n: usize,
    geom: &BoundaryGeometry,
) -> Result<f64, CliError> {
    let grid = cfg.grid_spec()?;
    if n == 0 {
        return Ok(subspace_distance(f, &[], grid, &geom.domain)?);
    }
    let p = cfg
        .training
        .partitions
        .iter()
        .find(|p| p[0] * p[1] == n)
        .ok_or_else(|| CliError::Config(format!("no configured partition with n = {n}")))?;
    let training = training_partition(cfg.k_box()?, p[0], p[1])?;
    Ok(subspace_distance(f, &training, grid, &geom.domain)?)
}

/// Per-variant wall times in seconds; `train` and `extend` are zero for the
/// full-view and zero-extension variants.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub variant: String,
    pub n: Option<usize>,
    pub train: f64,
    pub extend: f64,
    pub reconstruct: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub report: ErrorReport,
    pub timings: Vec<Timing>,
    pub ridges: Vec<(String, f64)>,
    pub out_dir: PathBuf,
}

fn timings_csv(timings: &[Timing]) -> String {
    let mut out = String::from("variant,n,train_s,extend_s,reconstruct_s\n");
    for t in timings {
        let n = t.n.map(|n| n.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            t.variant, n, t.train, t.extend, t.reconstruct
        ));
    }
    out
}

fn emit_variant(
    cfg: &ExperimentConfig,
    geom: &BoundaryGeometry,
    truth: &ImageField,
    name: &str,
    data: &WaveData,
    data_range: f64,
    out: &Path,
) -> Result<(f64, f64), CliError> {
    save_wave_data(data, out.join(format!("data_{name}.patb")))?;
    export_wave_pgm(
        data,
        -data_range,
        data_range,
        out.join(format!("data_{name}.pgm")),
    )?;
    let start = Instant::now();
    let image = reconstruct(data, geom, truth.grid)?;
    let seconds = start.elapsed().as_secs_f64();
    save_image(&image, out.join(format!("recon_{name}.patb")))?;
    let [lo, hi] = cfg.output.image_range;
    export_pgm(&image, lo, hi, out.join(format!("recon_{name}.pgm")))?;
    let e2 = e2_error(&image, truth)?;
    info!("{name}: E2 = {e2:.6}, reconstruction {seconds:.2} s");
    Ok((e2, seconds))
}

/// The complete pipeline: truth data, zero extension, one learned extension
/// per configured partition, reconstructions, error and timing tables.
pub fn cmd_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary, CliError> {
    ensure_dir(out)?;
    let (geom, split) = cfg.geometry()?;
    let grid = cfg.grid_spec()?;
    let f = cfg.load_phantom()?;
    let mut report = ErrorReport::default();
    if !f.support_within(|x| split.detection_region_contains(x)) {
        warn!("phantom support leaves the detection region");
        report.metadata.insert(
            "warning".into(),
            "phantom support leaves the detection region".into(),
        );
    }
    report
        .metadata
        .insert("nodes".into(), geom.len().to_string());
    report
        .metadata
        .insert("n_time".into(), geom.n_time.to_string());
    report
        .metadata
        .insert("grid".into(), format!("{}x{}", grid.nx, grid.ny));

    let truth = rasterize(&f, grid, &geom.domain);
    save_image(&truth, out.join("truth.patb"))?;
    let [lo, hi] = cfg.output.image_range;
    export_pgm(&truth, lo, hi, out.join("truth.pgm"))?;

    let full = simulate_wave_data(&f, &geom, &split, Part::Full)?;
    let data_range = full
        .samples
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let u1 = full.restrict(&split, Part::Gamma1)?;
    let mut timings = Vec::new();
    let mut ridges = Vec::new();

    let (e2, rec) = emit_variant(cfg, &geom, &truth, "full", &full, data_range, out)?;
    report.add_variant("full", None, e2);
    timings.push(Timing {
        variant: "full".into(),
        n: None,
        train: 0.0,
        extend: 0.0,
        reconstruct: rec,
    });

    let zero = zero_extend(&u1, &geom, &split)?;
    let (e2, rec) = emit_variant(cfg, &geom, &truth, "zero", &zero, data_range, out)?;
    drop(zero);
    report.add_variant("zero", Some(0), e2);
    report
        .e_n
        .insert(0, subspace_distance(&f, &[], grid, &geom.domain)?);
    timings.push(Timing {
        variant: "zero".into(),
        n: Some(0),
        train: 0.0,
        extend: 0.0,
        reconstruct: rec,
    });

    for &p in &cfg.training.partitions {
        let name = partition_name(p);
        let n = p[0] * p[1];
        let (model, train_s) = train_partition(cfg, &geom, &split, p)?;
        ridges.push((name.clone(), model.ridge()));
        if cfg.training.save_models {
            save_model(&model, out.join(format!("model_{}x{}.patb", p[0], p[1])))?;
        }
        let start = Instant::now();
        let u2 = extend(&model, &u1)?;
        let extend_s = start.elapsed().as_secs_f64();
        let training = model.training.phantoms.clone();
        drop(model);
        let stitched = stitch(&u1, &u2, &geom, &split)?;
        let (e2, rec) = emit_variant(cfg, &geom, &truth, &name, &stitched, data_range, out)?;
        report.add_variant(&name, Some(n), e2);
        report
            .e_n
            .insert(n, subspace_distance(&f, &training, grid, &geom.domain)?);
        timings.push(Timing {
            variant: name,
            n: Some(n),
            train: train_s,
            extend: extend_s,
            reconstruct: rec,
        });
    }

    report.validate()?;
    export_csv(&report, out.join("errors.csv"))?;
    fs::write(out.join("timings.csv"), timings_csv(&timings))
        .map_err(|e| CliError::Config(format!("cannot write timings: {e}")))?;
    Ok(ExperimentSummary {
        report,
        timings,
        ridges,
        out_dir: out.to_path_buf(),
    })
}
