//! Pipeline stages: prepare, train-seg, segment, features, train-clf,
//! evaluate. Every stage reads and writes on-disk artifacts under the run's
//! output directory and is deterministic for a fixed (config, manifest, seed).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fundus_core::classifier::{
    fit_scaler, grid_search, load_model, save_model, smo_train, DiagLabel, GridSearchResult,
    SmoParams, SvmError, SvmModel, SvmTrainConfig,
};
use fundus_core::geometry::{compute_features, FeatureVector};
use fundus_core::imaging::{
    clahe, expand_dataset_with_sigma, load_binary_mask, load_gray_png, load_image, load_label_mask,
    merge_masks, resize_image, resize_mask, save_gray_png, save_label_mask, split_label_mask,
    to_grayscale_with, Provenance, Sample,
};
use fundus_core::metrics::{
    confusion_counts, diag_scores, mean_seg_scores, seg_scores, ConfusionCounts, DiagScores,
    SegScores,
};
use fundus_core::rng::SeededRng;
use fundus_core::segnet::{
    load_weights, predict_mask, save_weights, train_segmenter, SegTrainConfig, UNetModel,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::{CaseLabel, Manifest, Split};
use crate::workers::par_map;
use crate::PipelineError;

pub const FEATURE_CSV_HEADER: &str =
    "id,acdr,dcdr,cup_diameter,disc_diameter,cup_area,disc_area,s_distance,i_distance,source,resolution,label";

/// Which masks feed the feature extractor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskSource {
    GroundTruth,
    Predicted,
}

impl MaskSource {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskSource::GroundTruth => "ground_truth",
            MaskSource::Predicted => "predicted",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitFilter {
    Train,
    Test,
    All,
}

impl SplitFilter {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitFilter::Train => "train",
            SplitFilter::Test => "test",
            SplitFilter::All => "all",
        }
    }

    fn admits(self, split: Split) -> bool {
        match self {
            SplitFilter::Train => split == Split::Train,
            SplitFilter::Test => split == Split::Test,
            SplitFilter::All => true,
        }
    }
}

/// Well-known artifact locations under the run output directory.
pub struct Artifacts<'a> {
    out: &'a Path,
}

impl<'a> Artifacts<'a> {
    pub fn new(out: &'a Path) -> Self {
        Self { out }
    }

    pub fn prepared_manifest(&self) -> PathBuf {
        self.out.join("prepared/prepared_manifest.csv")
    }

    pub fn prepared_image(&self, id: &str) -> PathBuf {
        self.out.join(format!("prepared/images/{id}.png"))
    }

    pub fn prepared_mask(&self, id: &str) -> PathBuf {
        self.out.join(format!("prepared/masks/{id}.png"))
    }

    pub fn weights(&self) -> PathBuf {
        self.out.join("weights.bin")
    }

    pub fn train_log(&self) -> PathBuf {
        self.out.join("train_log.jsonl")
    }

    pub fn predicted_mask(&self, id: &str) -> PathBuf {
        self.out.join(format!("predicted/{id}.png"))
    }

    pub fn segmentation_report(&self) -> PathBuf {
        self.out.join("segmentation_report.json")
    }

    pub fn features_csv(&self, source: MaskSource, split: SplitFilter) -> PathBuf {
        self.out.join(format!(
            "features-{}-{}.csv",
            source.as_str(),
            split.as_str()
        ))
    }

    pub fn svm_model(&self) -> PathBuf {
        self.out.join("svm_model.json")
    }

    pub fn cv_table(&self) -> PathBuf {
        self.out.join("cv_table.json")
    }

    pub fn report_json(&self) -> PathBuf {
        self.out.join("report.json")
    }

    pub fn report_text(&self) -> PathBuf {
        self.out.join("report.txt")
    }
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path).map_err(|e| PipelineError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

// ---------------------------------------------------------------------------
// prepared manifest

#[derive(Clone, Debug)]
pub struct PreparedRow {
    pub id: String,
    pub split: Split,
    pub label: CaseLabel,
    pub provenance: String,
}

fn write_prepared_manifest(path: &Path, rows: &[PreparedRow]) -> Result<(), PipelineError> {
    let mut text = String::from("id,image,mask,split,label,provenance\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{},prepared/images/{}.png,prepared/masks/{}.png,{},{},{}",
            r.id,
            r.id,
            r.id,
            r.split.as_str(),
            r.label.as_str(),
            r.provenance
        );
    }
    write_file(path, &text)
}

pub fn read_prepared_manifest(out: &Path) -> Result<Vec<PreparedRow>, PipelineError> {
    let path = Artifacts::new(out).prepared_manifest();
    if !path.is_file() {
        return Err(PipelineError::MissingArtifact(format!(
            "{} (run `prepare` first)",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(PipelineError::MalformedArtifact {
                path: path.display().to_string(),
                msg: format!("line {}: expected 6 fields", idx + 1),
            });
        }
        let split = Split::parse(fields[3]).ok_or_else(|| PipelineError::MalformedArtifact {
            path: path.display().to_string(),
            msg: format!("line {}: bad split", idx + 1),
        })?;
        let label =
            CaseLabel::parse(fields[4]).ok_or_else(|| PipelineError::MalformedArtifact {
                path: path.display().to_string(),
                msg: format!("line {}: bad label", idx + 1),
            })?;
        rows.push(PreparedRow {
            id: fields[0].to_string(),
            split,
            label,
            provenance: fields[5].to_string(),
        });
    }
    if rows.is_empty() {
        return Err(PipelineError::MalformedArtifact {
            path: path.display().to_string(),
            msg: "no rows".into(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// prepare

pub struct PrepareSummary {
    pub train_originals: usize,
    pub train_total: usize,
    pub test_total: usize,
    /// Cup pixels found outside their disc and clipped during merging.
    pub cup_clip_warnings: usize,
}

pub fn cmd_prepare(
    cfg: &RunConfig,
    manifest_path: &Path,
    out: &Path,
) -> Result<PrepareSummary, PipelineError> {
    let manifest = Manifest::load(manifest_path)?;
    let art = Artifacts::new(out);
    create_dir(&out.join("prepared/images"))?;
    create_dir(&out.join("prepared/masks"))?;

    let res = cfg.resolution;
    let mut entries = manifest.entries.clone();
    entries.sort_by(|a, b| a.id.cmp(&b.id)); // outputs independent of manifest row order

    let mut clip_total = 0usize;
    let mut train_samples = Vec::new();
    let mut rows = Vec::new();
    let mut test_count = 0usize;
    for entry in &entries {
        let rgb = load_image(&entry.image)?;
        let gray = to_grayscale_with(&rgb, cfg.gray_method.to_core());
        let resized = resize_image(&gray, res, res);
        let enhanced = if cfg.clahe_enabled {
            clahe(
                &resized,
                cfg.clahe_clip_limit,
                (cfg.clahe_tiles[0], cfg.clahe_tiles[1]),
            )?
        } else {
            resized
        };
        let disc = load_binary_mask(&entry.disc_mask)?;
        let cup = load_binary_mask(&entry.cup_mask)?;
        let (merged, clipped) = merge_masks(&disc, &cup)?;
        clip_total += clipped;
        let mask = resize_mask(&merged, res, res);

        match entry.split {
            Split::Train => {
                train_samples.push((
                    entry.label,
                    Sample::new(entry.id.clone(), enhanced, mask, Provenance::Original)?,
                ));
            }
            Split::Test => {
                save_gray_png(&enhanced, &art.prepared_image(&entry.id))?;
                save_label_mask(&mask, &art.prepared_mask(&entry.id))?;
                rows.push(PreparedRow {
                    id: entry.id.clone(),
                    split: Split::Test,
                    label: entry.label,
                    provenance: Provenance::Original.as_str().to_string(),
                });
                test_count += 1;
            }
        }
    }

    if train_samples.is_empty() {
        return Err(PipelineError::Config(
            "manifest has no training entries".into(),
        ));
    }
    if cfg.augment_target < train_samples.len() {
        return Err(PipelineError::Config(format!(
            "augment_target {} is below the {} training images",
            cfg.augment_target,
            train_samples.len()
        )));
    }

    let originals: Vec<Sample> = train_samples.iter().map(|(_, s)| s.clone()).collect();
    let labels: std::collections::BTreeMap<String, CaseLabel> = train_samples
        .iter()
        .map(|(l, s)| (s.id.clone(), *l))
        .collect();
    let expanded =
        expand_dataset_with_sigma(&originals, cfg.augment_target, cfg.seed, cfg.noise_sigma)?;

    let mut train_rows = Vec::with_capacity(expanded.len());
    for s in &expanded {
        save_gray_png(&s.image, &art.prepared_image(&s.id))?;
        save_label_mask(&s.mask, &art.prepared_mask(&s.id))?;
        // augmented ids look like `{base}-aug{r}-{op}`
        let base = s.id.split("-aug").next().unwrap_or(&s.id);
        train_rows.push(PreparedRow {
            id: s.id.clone(),
            split: Split::Train,
            label: labels.get(base).copied().unwrap_or(CaseLabel::Unknown),
            provenance: s.provenance.as_str().to_string(),
        });
    }
    let train_total = train_rows.len();
    train_rows.extend(rows);
    write_prepared_manifest(&art.prepared_manifest(), &train_rows)?;

    Ok(PrepareSummary {
        train_originals: originals.len(),
        train_total,
        test_total: test_count,
        cup_clip_warnings: clip_total,
    })
}

// ---------------------------------------------------------------------------
// train-seg

pub struct TrainSegSummary {
    pub weights: PathBuf,
    pub epochs: usize,
    pub final_train_loss: f64,
    pub best_val_loss: Option<f64>,
}

pub fn cmd_train_seg(cfg: &RunConfig, out: &Path) -> Result<TrainSegSummary, PipelineError> {
    let art = Artifacts::new(out);
    let rows = read_prepared_manifest(out)?;
    let train_rows: Vec<&PreparedRow> = rows.iter().filter(|r| r.split == Split::Train).collect();
    if train_rows.is_empty() {
        return Err(PipelineError::MissingArtifact(
            "no prepared training rows".into(),
        ));
    }

    let mut samples = Vec::with_capacity(train_rows.len());
    for row in &train_rows {
        let image = load_gray_png(&art.prepared_image(&row.id))?;
        let mask = load_label_mask(&art.prepared_mask(&row.id))?;
        samples.push(Sample::new(
            row.id.clone(),
            image,
            mask,
            Provenance::Original,
        )?);
    }

    // 90/10 train/validation split by seeded shuffle
    let mut order: Vec<usize> = (0..samples.len()).collect();
    SeededRng::derive(cfg.seed, 0x7a11).shuffle(&mut order);
    let n_val = ((samples.len() as f64 * cfg.val_fraction).round() as usize)
        .min(samples.len().saturating_sub(1));
    let val_idx: std::collections::BTreeSet<usize> = order[..n_val].iter().copied().collect();
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, s) in samples.into_iter().enumerate() {
        if val_idx.contains(&i) {
            val.push(s);
        } else {
            train.push(s);
        }
    }

    let seg_cfg = SegTrainConfig {
        base_channels: cfg.base_channels,
        n_classes: 3,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size.min(train.len()),
        learning_rate: cfg.learning_rate,
    };
    let (model, log) = train_segmenter(&seg_cfg, &train, &val, cfg.seed)?;

    save_weights(&model, &art.weights())?;
    let mut log_text = String::new();
    for record in &log {
        let _ = writeln!(
            log_text,
            "{}",
            serde_json::to_string(record).expect("log record serializes")
        );
    }
    write_file(&art.train_log(), &log_text)?;

    let best_val_loss = log.iter().filter_map(|r| r.val_loss).fold(None, |m, v| {
        Some(match m {
            None => v,
            Some(b) if v < b => v,
            Some(b) => b,
        })
    });
    Ok(TrainSegSummary {
        weights: art.weights(),
        epochs: log.len(),
        final_train_loss: log.last().map(|r| r.train_loss).unwrap_or(f64::NAN),
        best_val_loss,
    })
}

// ---------------------------------------------------------------------------
// segment

#[derive(Serialize)]
struct PerImageScores {
    id: String,
    disc: SegScores,
    cup: SegScores,
}

#[derive(Serialize)]
struct SegmentationReport {
    config_hash: String,
    seed: u64,
    resolution: usize,
    split: String,
    n_images: usize,
    mean_disc: SegScores,
    mean_cup: SegScores,
    per_image: Vec<PerImageScores>,
}

pub struct SegmentSummary {
    pub images: usize,
    pub mean_disc: SegScores,
    pub mean_cup: SegScores,
    pub report: PathBuf,
}

pub fn cmd_segment(
    cfg: &RunConfig,
    out: &Path,
    weights: &Path,
    split: SplitFilter,
) -> Result<SegmentSummary, PipelineError> {
    let art = Artifacts::new(out);
    let rows = read_prepared_manifest(out)?;
    let mut targets: Vec<&PreparedRow> = rows
        .iter()
        .filter(|r| r.provenance == "original" && split.admits(r.split))
        .collect();
    targets.sort_by(|a, b| a.id.cmp(&b.id));
    if targets.is_empty() {
        return Err(PipelineError::MissingArtifact(format!(
            "no prepared {} images to segment",
            split.as_str()
        )));
    }

    let model: UNetModel = load_weights(weights)?;
    create_dir(&out.join("predicted"))?;

    let results: Vec<Result<PerImageScores, PipelineError>> = par_map(&targets, |_, row| {
        let image = load_gray_png(&art.prepared_image(&row.id))?;
        let truth = load_label_mask(&art.prepared_mask(&row.id))?;
        let pred = predict_mask(&model, &image)?;
        save_label_mask(&pred, &art.predicted_mask(&row.id))?;
        let (pd, pc) = split_label_mask(&pred);
        let (td, tc) = split_label_mask(&truth);
        Ok(PerImageScores {
            id: row.id.clone(),
            disc: seg_scores(&confusion_counts(&pd, &td)?),
            cup: seg_scores(&confusion_counts(&pc, &tc)?),
        })
    });
    let mut per_image = Vec::with_capacity(results.len());
    for r in results {
        per_image.push(r?);
    }

    let mean_disc = mean_seg_scores(&per_image.iter().map(|p| p.disc).collect::<Vec<_>>())?;
    let mean_cup = mean_seg_scores(&per_image.iter().map(|p| p.cup).collect::<Vec<_>>())?;
    let report = SegmentationReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        resolution: cfg.resolution,
        split: split.as_str().to_string(),
        n_images: per_image.len(),
        mean_disc,
        mean_cup,
        per_image,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&art.segmentation_report(), &format!("{text}\n"))?;

    Ok(SegmentSummary {
        images: report.n_images,
        mean_disc,
        mean_cup,
        report: art.segmentation_report(),
    })
}

// ---------------------------------------------------------------------------
// features

pub struct FeaturesSummary {
    pub csv: PathBuf,
    pub rows: usize,
    /// Ids skipped because the mask had no disc pixels.
    pub skipped: Vec<String>,
}

pub fn cmd_features(
    cfg: &RunConfig,
    out: &Path,
    source: MaskSource,
    split: SplitFilter,
) -> Result<FeaturesSummary, PipelineError> {
    let art = Artifacts::new(out);
    let rows = read_prepared_manifest(out)?;
    let mut targets: Vec<&PreparedRow> = rows
        .iter()
        .filter(|r| r.provenance == "original" && split.admits(r.split))
        .collect();
    targets.sort_by(|a, b| a.id.cmp(&b.id));
    if targets.is_empty() {
        return Err(PipelineError::MissingArtifact(format!(
            "no prepared {} rows for feature extraction",
            split.as_str()
        )));
    }

    type FeatureOutcome = Result<Option<(String, FeatureVector, CaseLabel)>, PipelineError>;
    let computed: Vec<FeatureOutcome> = par_map(&targets, |_, row| {
        let mask_path = match source {
            MaskSource::GroundTruth => art.prepared_mask(&row.id),
            MaskSource::Predicted => {
                let p = art.predicted_mask(&row.id);
                if !p.is_file() {
                    return Err(PipelineError::MissingArtifact(format!(
                        "{} (run `segment` first)",
                        p.display()
                    )));
                }
                p
            }
        };
        let mask = load_label_mask(&mask_path)?;
        let (disc, cup) = split_label_mask(&mask);
        match compute_features(&disc, &cup) {
            Ok(f) => Ok(Some((row.id.clone(), f, row.label))),
            Err(fundus_core::geometry::GeometryError::EmptyMask) => Ok(None),
            Err(e) => Err(e.into()),
        }
    });

    let mut text = format!("{FEATURE_CSV_HEADER}\n");
    let mut kept = 0usize;
    let mut skipped = Vec::new();
    for (row, result) in targets.iter().zip(computed) {
        match result? {
            Some((id, f, label)) => {
                let v = f.to_array();
                let _ = writeln!(
                    text,
                    "{id},{},{},{},{},{},{},{},{},{},{},{}",
                    v[0],
                    v[1],
                    v[2],
                    v[3],
                    v[4],
                    v[5],
                    v[6],
                    v[7],
                    source.as_str(),
                    cfg.resolution,
                    label.as_str()
                );
                kept += 1;
            }
            None => skipped.push(row.id.clone()),
        }
    }
    let csv = art.features_csv(source, split);
    write_file(&csv, &text)?;
    if !skipped.is_empty() {
        eprintln!(
            "warning: {} empty-disc mask(s) skipped: {}",
            skipped.len(),
            skipped.join(", ")
        );
    }
    Ok(FeaturesSummary {
        csv,
        rows: kept,
        skipped,
    })
}

// ---------------------------------------------------------------------------
// feature CSV reading

pub struct FeatureRow {
    pub id: String,
    pub features: FeatureVector,
    pub label: CaseLabel,
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<FeatureRow>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != FEATURE_CSV_HEADER {
        return Err(PipelineError::MalformedArtifact {
            path: path.display().to_string(),
            msg: format!("header must be `{FEATURE_CSV_HEADER}`"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(PipelineError::MalformedArtifact {
                path: path.display().to_string(),
                msg: format!("line {}: expected 12 fields", idx + 2),
            });
        }
        let mut values = [0.0; 8];
        for (slot, raw) in values.iter_mut().zip(&fields[1..9]) {
            *slot = raw.parse().map_err(|_| PipelineError::MalformedArtifact {
                path: path.display().to_string(),
                msg: format!("line {}: bad float `{raw}`", idx + 2),
            })?;
        }
        let label =
            CaseLabel::parse(fields[11]).ok_or_else(|| PipelineError::MalformedArtifact {
                path: path.display().to_string(),
                msg: format!("line {}: bad label", idx + 2),
            })?;
        rows.push(FeatureRow {
            id: fields[0].to_string(),
            features: FeatureVector::from_array(values),
            label,
        });
    }
    if rows.is_empty() {
        return Err(PipelineError::MalformedArtifact {
            path: path.display().to_string(),
            msg: "no feature rows".into(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// train-clf

#[derive(Serialize)]
struct CvTableFile {
    best_c: f64,
    best_gamma: f64,
    cells: Vec<fundus_core::classifier::CvCell>,
}

pub struct TrainClfSummary {
    pub model: PathBuf,
    pub cv_table: PathBuf,
    pub best_c: f64,
    pub best_gamma: f64,
    pub converged: bool,
}

pub fn cmd_train_clf(
    cfg: &RunConfig,
    out: &Path,
    features_csv: &Path,
) -> Result<TrainClfSummary, PipelineError> {
    let art = Artifacts::new(out);
    let rows = read_feature_csv(features_csv)?;
    let mut x_raw = Vec::new();
    let mut y = Vec::new();
    for row in &rows {
        if let Some(diag) = row.label.to_diag() {
            x_raw.push(row.features.to_array().to_vec());
            y.push(diag);
        }
    }
    if x_raw.is_empty() {
        return Err(PipelineError::MissingLabels(
            "no labeled feature rows".into(),
        ));
    }
    if !y.contains(&DiagLabel::Glaucoma) || !y.contains(&DiagLabel::Normal) {
        return Err(PipelineError::Svm(SvmError::SingleClass));
    }

    let scaler = fit_scaler(&x_raw)?;
    let x: Vec<Vec<f64>> = x_raw
        .iter()
        .map(|r| fundus_core::classifier::apply_scaler(&scaler, r))
        .collect();

    let search_cfg = SvmTrainConfig {
        c_grid: cfg.svm_c_grid.clone(),
        gamma_grid: cfg.svm_gamma_grid.clone(),
        tolerance: cfg.svm_tolerance,
        max_passes: cfg.svm_max_passes,
        cv_folds: cfg.cv_folds,
        seed: cfg.seed,
    };
    let GridSearchResult {
        best_c,
        best_gamma,
        table,
    } = grid_search(&x, &y, &search_cfg)?;

    let params = SmoParams {
        c: best_c,
        gamma: best_gamma,
        tolerance: cfg.svm_tolerance,
        max_passes: cfg.svm_max_passes,
        seed: SeededRng::derive(cfg.seed, 0xf17).next_u64(),
    };
    let (mut model, converged) = match smo_train(&x, &y, &params) {
        Ok(m) => (m, true),
        Err(SvmError::NotConverged { model, sweeps }) => {
            eprintln!("warning: SMO stopped after {sweeps} sweeps; using the best iterate");
            (*model, false)
        }
        Err(e) => return Err(e.into()),
    };
    model.scaler = scaler;

    save_model(&model, &art.svm_model())?;
    let cv_file = CvTableFile {
        best_c,
        best_gamma,
        cells: table,
    };
    let text = serde_json::to_string_pretty(&cv_file).expect("cv table serializes");
    write_file(&art.cv_table(), &format!("{text}\n"))?;

    Ok(TrainClfSummary {
        model: art.svm_model(),
        cv_table: art.cv_table(),
        best_c,
        best_gamma,
        converged,
    })
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Serialize)]
struct EvaluationReport {
    version: u32,
    config_hash: String,
    seed: u64,
    resolution: usize,
    features_csv: String,
    n_cases: usize,
    counts: ConfusionCounts,
    scores: DiagScores,
}

pub struct EvaluateSummary {
    pub counts: ConfusionCounts,
    pub scores: DiagScores,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    out: &Path,
    model_path: &Path,
    features_csv: &Path,
) -> Result<EvaluateSummary, PipelineError> {
    let art = Artifacts::new(out);
    let model: SvmModel = load_model(model_path)?;
    let rows = read_feature_csv(features_csv)?;

    let unlabeled: Vec<String> = rows
        .iter()
        .filter(|r| r.label.to_diag().is_none())
        .map(|r| r.id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(PipelineError::MissingLabels(unlabeled.join(", ")));
    }

    let mut counts = ConfusionCounts::default();
    for row in &rows {
        let truth = row.label.to_diag().expect("checked above");
        let pred = model.predict(&row.features.to_array());
        match (pred, truth) {
            (DiagLabel::Glaucoma, DiagLabel::Glaucoma) => counts.true_pos += 1,
            (DiagLabel::Glaucoma, DiagLabel::Normal) => counts.false_pos += 1,
            (DiagLabel::Normal, DiagLabel::Glaucoma) => counts.false_neg += 1,
            (DiagLabel::Normal, DiagLabel::Normal) => counts.true_neg += 1,
        }
    }
    let scores = diag_scores(&counts);

    let report = EvaluationReport {
        version: 1,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        resolution: cfg.resolution,
        features_csv: features_csv
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        n_cases: rows.len(),
        counts,
        scores,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&art.report_json(), &format!("{json}\n"))?;

    let mut text = String::new();
    let _ = writeln!(text, "cases        {}", report.n_cases);
    let _ = writeln!(
        text,
        "confusion    tp {} fp {} fn {} tn {}",
        counts.true_pos, counts.false_pos, counts.false_neg, counts.true_neg
    );
    let _ = writeln!(text, "sensitivity  {:.2}%", scores.sensitivity * 100.0);
    let _ = writeln!(text, "specificity  {:.2}%", scores.specificity * 100.0);
    let _ = writeln!(text, "precision    {:.2}%", scores.precision * 100.0);
    let _ = writeln!(text, "npv          {:.2}%", scores.npv * 100.0);
    let _ = writeln!(text, "accuracy     {:.2}%", scores.accuracy * 100.0);
    write_file(&art.report_text(), &text)?;

    Ok(EvaluateSummary {
        counts,
        scores,
        report_json: art.report_json(),
        report_text: art.report_text(),
    })
}
