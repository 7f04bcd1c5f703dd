//! Synthetic phantom dataset generator.
//!
//! Writes a small labeled fundus-like dataset (flat-shaded ellipse eyes) with
//! the standard manifest layout, so the whole pipeline can run without any
//! clinical data. Glaucomatous eyes get a large cup shifted toward the
//! inferior quadrant; normal eyes a small concentric cup.

use std::path::{Path, PathBuf};

use fundus_core::imaging::{save_binary_mask, save_image_png};
use fundus_core::phantom::{gray_to_rgb, phantom_image, phantom_masks};
use fundus_core::rng::SeededRng;

use crate::manifest::MANIFEST_HEADER;
use crate::PipelineError;

pub struct PhantomSummary {
    pub manifest: PathBuf,
    pub glaucoma: usize,
    pub normal: usize,
}

/// Generates `count` phantom eyes (alternating normal/glaucoma) at the given
/// square resolution. Within each class the first ~70% go to the train
/// split. Returns the manifest path.
pub fn generate(
    dir: &Path,
    count: usize,
    resolution: usize,
    seed: u64,
) -> Result<PhantomSummary, PipelineError> {
    if count < 4 {
        return Err(PipelineError::Config(
            "phantom dataset needs at least 4 eyes".into(),
        ));
    }
    for sub in ["images", "disc_masks", "cup_masks"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| PipelineError::io(&p, e))?;
    }

    let res = resolution as f64;
    let mut rows = Vec::with_capacity(count);
    let mut per_class = [0usize; 2]; // [normal, glaucoma]
    let class_total = [count - count / 2, count / 2];
    for i in 0..count {
        let glaucoma = i % 2 == 1;
        let mut rng = SeededRng::derive(seed, i as u64);
        let jitter = |rng: &mut SeededRng, amp: f64| (rng.next_f64() * 2.0 - 1.0) * amp;

        let cx = res / 2.0 + jitter(&mut rng, res * 0.04);
        let cy = res / 2.0 + jitter(&mut rng, res * 0.04);
        let disc_a = res * (0.30 + 0.03 * rng.next_f64());
        let disc_b = res * (0.26 + 0.03 * rng.next_f64());
        let rot = rng.next_f64() * 90.0;
        let (cup_scale, cup_dy) = if glaucoma {
            // enlarged cup, notching toward the inferior rim
            (
                0.72 + 0.10 * rng.next_f64(),
                res * (0.02 + 0.02 * rng.next_f64()),
            )
        } else {
            (0.32 + 0.08 * rng.next_f64(), jitter(&mut rng, res * 0.005))
        };
        let cup_dx = jitter(&mut rng, res * 0.01);

        let (disc, cup) = phantom_masks(
            resolution, resolution, cx, cy, disc_a, disc_b, rot, cup_scale, cup_dx, cup_dy,
        );
        let image = gray_to_rgb(&phantom_image(&disc, &cup, 25, 170, 230));

        let id = format!("eye{i:03}");
        let image_rel = format!("images/{id}.png");
        let disc_rel = format!("disc_masks/{id}.png");
        let cup_rel = format!("cup_masks/{id}.png");
        save_image_png(&image, &dir.join(&image_rel))?;
        save_binary_mask(&disc, &dir.join(&disc_rel))?;
        save_binary_mask(&cup, &dir.join(&cup_rel))?;

        let class = usize::from(glaucoma);
        per_class[class] += 1;
        // first ~70% of each class trains; both classes reach both splits
        let split = if per_class[class] * 10 <= class_total[class] * 7 {
            "train"
        } else {
            "test"
        };
        let label = if glaucoma { "glaucoma" } else { "normal" };
        rows.push(format!(
            "{id},{image_rel},{disc_rel},{cup_rel},{split},{label}"
        ));
    }

    let manifest = dir.join("manifest.csv");
    let mut text = format!("{MANIFEST_HEADER}\n");
    for row in &rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(&manifest, text).map_err(|e| PipelineError::io(&manifest, e))?;
    Ok(PhantomSummary {
        manifest,
        glaucoma: count / 2,
        normal: count - count / 2,
    })
}
