//! SVM model persistence as structured JSON text.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which round-trips f64 exactly.

use std::path::Path;

use serde::Deserialize;

use super::{Scaler, SvmError, SvmModel};

const VERSION: u32 = 1;

fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

fn fmt_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|&v| fmt(v)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn save_model(model: &SvmModel, path: &Path) -> Result<(), SvmError> {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"version\": {VERSION},\n"));
    out.push_str(&format!("  \"c\": {},\n", fmt(model.c)));
    out.push_str(&format!("  \"gamma\": {},\n", fmt(model.gamma)));
    out.push_str(&format!("  \"bias\": {},\n", fmt(model.bias)));
    out.push_str(&format!(
        "  \"scaler_mean\": {},\n",
        fmt_list(&model.scaler.mean)
    ));
    out.push_str(&format!(
        "  \"scaler_std\": {},\n",
        fmt_list(&model.scaler.std)
    ));
    let svs: Vec<String> = model
        .support_vectors
        .iter()
        .map(|sv| format!("    {}", fmt_list(sv)))
        .collect();
    out.push_str(&format!(
        "  \"support_vectors\": [\n{}\n  ],\n",
        svs.join(",\n")
    ));
    out.push_str(&format!("  \"alpha_y\": {}\n", fmt_list(&model.alpha_y)));
    out.push_str("}\n");
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Deserialize)]
struct ModelFile {
    version: u32,
    c: f64,
    gamma: f64,
    bias: f64,
    scaler_mean: Vec<f64>,
    scaler_std: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
    alpha_y: Vec<f64>,
}

pub fn load_model(path: &Path) -> Result<SvmModel, SvmError> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| SvmError::Malformed(e.to_string()))?;
    if file.version != VERSION {
        return Err(SvmError::VersionMismatch(file.version));
    }
    if file.gamma <= 0.0 {
        return Err(SvmError::Malformed("gamma must be positive".into()));
    }
    if file.support_vectors.is_empty() || file.support_vectors.len() != file.alpha_y.len() {
        return Err(SvmError::Malformed(
            "support vector and coefficient counts differ".into(),
        ));
    }
    let dim = file.scaler_mean.len();
    if file.scaler_std.len() != dim || file.support_vectors.iter().any(|sv| sv.len() != dim) {
        return Err(SvmError::Malformed(
            "inconsistent feature dimensions".into(),
        ));
    }
    if file.scaler_std.iter().any(|&s| s <= 0.0) {
        return Err(SvmError::Malformed("scaler std must be positive".into()));
    }
    Ok(SvmModel {
        support_vectors: file.support_vectors,
        alpha_y: file.alpha_y,
        bias: file.bias,
        gamma: file.gamma,
        c: file.c,
        scaler: Scaler {
            mean: file.scaler_mean,
            std: file.scaler_std,
        },
    })
}
