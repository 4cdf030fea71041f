//! Directory-based dataset interchange.
//!
//! Layout:
//!
//! ```text
//! <root>/manifest.json            dataset name, class table, image list
//! <root>/labels/<image_id>.txt    ground truth, one `class cx cy w h` per line
//! <root>/predictions/<image_id>.txt  detector output, `class cx cy w h conf`
//! ```
//!
//! Coordinates in label and prediction files are normalized to [0, 1] in the
//! YOLO center/size convention; the loader converts them to pixel corners
//! using the manifest's per-image dimensions. A missing prediction file means
//! zero predictions for that image. Lines may carry `#` comments; all text is
//! UTF-8 and whitespace-separated.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    BoundingBox, ClassDef, ClassId, Dataset, GroundTruthObject, ImageRecord, ObjectId, Prediction,
};
use crate::error::{Error, Result};

/// On-disk dataset formats understood by [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    YoloDir,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    name: String,
    classes: Vec<ManifestClass>,
    images: Vec<ManifestImage>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestClass {
    id: u32,
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestImage {
    image_id: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pair_key: Option<String>,
}

/// Loads and validates a dataset from `root` in the given format.
///
/// Loading is deterministic: image order follows the manifest and object ids
/// are assigned in (image, line) order.
pub fn load_dataset(root: &Path, format: DatasetFormat) -> Result<Dataset> {
    match format {
        DatasetFormat::YoloDir => read_yolo_dir(root),
    }
}

/// Reads a yolo_dir dataset. See the module docs for the layout.
pub fn read_yolo_dir(root: &Path) -> Result<Dataset> {
    let manifest_path = root.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let raw = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&raw).map_err(|e| Error::Manifest {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;

    let mut class_ids = HashSet::new();
    for c in &manifest.classes {
        if !class_ids.insert(c.id) {
            return Err(Error::Manifest {
                path: manifest_path.clone(),
                message: format!("duplicate class id {}", c.id),
            });
        }
    }

    let mut seen_images = HashSet::new();
    let mut seen_pair_keys = HashSet::new();
    let mut images = Vec::with_capacity(manifest.images.len());

    for entry in &manifest.images {
        if !seen_images.insert(entry.image_id.clone()) {
            return Err(Error::Manifest {
                path: manifest_path.clone(),
                message: format!("duplicate image id '{}'", entry.image_id),
            });
        }
        if entry.width == 0 || entry.height == 0 {
            return Err(Error::Manifest {
                path: manifest_path.clone(),
                message: format!("image '{}' has zero dimension", entry.image_id),
            });
        }
        if let Some(key) = &entry.pair_key {
            if !seen_pair_keys.insert(key.clone()) {
                return Err(Error::DuplicatePairKey {
                    dataset: manifest.name.clone(),
                    key: key.clone(),
                });
            }
        }

        let image_arc: Arc<str> = Arc::from(entry.image_id.as_str());
        let label_path = root.join("labels").join(format!("{}.txt", entry.image_id));
        let labels = fs::read_to_string(&label_path).map_err(|e| Error::io(&label_path, e))?;
        let mut ground_truth = Vec::new();
        for (line_no, line) in labels.lines().enumerate() {
            let Some(fields) = significant_fields(line) else {
                continue;
            };
            let row = parse_row(&fields, false, &label_path, line_no + 1, &class_ids)?;
            let bbox = row.to_pixel_box(entry.width, entry.height, &label_path, line_no + 1)?;
            ground_truth.push(GroundTruthObject {
                id: ObjectId::new(image_arc.clone(), ground_truth.len() as u32),
                class: ClassId(row.class),
                bbox,
            });
        }

        let pred_path = root
            .join("predictions")
            .join(format!("{}.txt", entry.image_id));
        let mut predictions = Vec::new();
        if pred_path.is_file() {
            let preds = fs::read_to_string(&pred_path).map_err(|e| Error::io(&pred_path, e))?;
            for (line_no, line) in preds.lines().enumerate() {
                let Some(fields) = significant_fields(line) else {
                    continue;
                };
                let row = parse_row(&fields, true, &pred_path, line_no + 1, &class_ids)?;
                let bbox = row.to_pixel_box(entry.width, entry.height, &pred_path, line_no + 1)?;
                predictions.push(Prediction {
                    class: ClassId(row.class),
                    bbox,
                    confidence: row.confidence.unwrap(),
                });
            }
        }

        images.push(ImageRecord {
            image_id: entry.image_id.clone(),
            width: entry.width,
            height: entry.height,
            ground_truth,
            predictions,
            pair_key: entry.pair_key.clone(),
        });
    }

    Ok(Dataset {
        name: manifest.name,
        class_table: manifest
            .classes
            .iter()
            .map(|c| ClassDef {
                id: ClassId(c.id),
                name: c.name.clone(),
            })
            .collect(),
        images,
    })
}

/// Strips the `#` comment and splits on whitespace; `None` for blank lines.
fn significant_fields(line: &str) -> Option<Vec<&str>> {
    let stripped = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let fields: Vec<&str> = stripped.split_whitespace().collect();
    if fields.is_empty() {
        None
    } else {
        Some(fields)
    }
}

struct LabelRow {
    class: u32,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    confidence: Option<f64>,
}

impl LabelRow {
    fn to_pixel_box(&self, width: u32, height: u32, path: &Path, line: usize) -> Result<BoundingBox> {
        let w_px = self.w * width as f64;
        let h_px = self.h * height as f64;
        let cx_px = self.cx * width as f64;
        let cy_px = self.cy * height as f64;
        BoundingBox::new(
            cx_px - w_px / 2.0,
            cy_px - h_px / 2.0,
            cx_px + w_px / 2.0,
            cy_px + h_px / 2.0,
        )
        .map_err(|e| Error::LabelParse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })
    }
}

fn parse_row(
    fields: &[&str],
    with_confidence: bool,
    path: &Path,
    line: usize,
    class_ids: &HashSet<u32>,
) -> Result<LabelRow> {
    let expected = if with_confidence { 6 } else { 5 };
    let err = |message: String| Error::LabelParse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if fields.len() != expected {
        return Err(err(format!(
            "expected {expected} fields, found {}",
            fields.len()
        )));
    }

    let class: u32 = fields[0]
        .parse()
        .map_err(|_| err(format!("invalid class id '{}'", fields[0])))?;
    if !class_ids.contains(&class) {
        return Err(err(format!("unknown class id {class}")));
    }

    let mut values = [0.0_f64; 5];
    let names = ["cx", "cy", "w", "h", "conf"];
    for (slot, (raw, name)) in fields[1..].iter().zip(names).enumerate() {
        let v: f64 = raw
            .parse()
            .map_err(|_| err(format!("invalid {name} '{raw}'")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(err(format!("{name} value {v} out of [0, 1]")));
        }
        values[slot] = v;
    }

    Ok(LabelRow {
        class,
        cx: values[0],
        cy: values[1],
        w: values[2],
        h: values[3],
        confidence: with_confidence.then_some(values[4]),
    })
}

/// Writes a dataset in yolo_dir format.
///
/// `root` must not already contain files. Normalized coordinates are written
/// with shortest round-trip formatting, so reloading reproduces boxes to well
/// within 1e-6 px. Boxes that extend outside their image cannot be expressed
/// in normalized [0, 1] text and are rejected.
pub fn write_yolo_dir(d: &Dataset, root: &Path) -> Result<()> {
    ensure_fresh_dir(root)?;
    let labels_dir = root.join("labels");
    let preds_dir = root.join("predictions");
    fs::create_dir_all(&labels_dir).map_err(|e| Error::io(&labels_dir, e))?;
    fs::create_dir_all(&preds_dir).map_err(|e| Error::io(&preds_dir, e))?;

    let manifest = Manifest {
        name: d.name.clone(),
        classes: d
            .class_table
            .iter()
            .map(|c| ManifestClass {
                id: c.id.0,
                name: c.name.clone(),
            })
            .collect(),
        images: d
            .images
            .iter()
            .map(|img| ManifestImage {
                image_id: img.image_id.clone(),
                width: img.width,
                height: img.height,
                pair_key: img.pair_key.clone(),
            })
            .collect(),
    };
    let manifest_path = root.join("manifest.json");
    let mut manifest_text = serde_json::to_string_pretty(&manifest)?;
    manifest_text.push('\n');
    fs::write(&manifest_path, manifest_text).map_err(|e| Error::io(&manifest_path, e))?;

    for img in &d.images {
        let mut label_text = String::new();
        for gt in &img.ground_truth {
            write_normalized_line(&mut label_text, gt.class, &gt.bbox, None, img)?;
        }
        let label_path = labels_dir.join(format!("{}.txt", img.image_id));
        fs::write(&label_path, label_text).map_err(|e| Error::io(&label_path, e))?;

        if !img.predictions.is_empty() {
            let mut pred_text = String::new();
            for p in &img.predictions {
                write_normalized_line(&mut pred_text, p.class, &p.bbox, Some(p.confidence), img)?;
            }
            let pred_path = preds_dir.join(format!("{}.txt", img.image_id));
            fs::write(&pred_path, pred_text).map_err(|e| Error::io(&pred_path, e))?;
        }
    }

    Ok(())
}

fn ensure_fresh_dir(root: &Path) -> Result<()> {
    if root.exists() {
        let mut entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        if entries.next().is_some() {
            return Err(Error::Io {
                path: root.to_path_buf(),
                source: std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    "output directory is not empty",
                ),
            });
        }
    } else {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    }
    Ok(())
}

fn write_normalized_line(
    out: &mut String,
    class: ClassId,
    bbox: &BoundingBox,
    confidence: Option<f64>,
    img: &ImageRecord,
) -> Result<()> {
    let (cx, cy) = bbox.center();
    let values = [
        cx / img.width as f64,
        cy / img.height as f64,
        bbox.width() / img.width as f64,
        bbox.height() / img.height as f64,
    ];
    for v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Report(format!(
                "box {} in image '{}' is not representable as normalized [0, 1] text",
                bbox, img.image_id
            )));
        }
    }
    let _ = write!(
        out,
        "{} {} {} {} {}",
        class.0, values[0], values[1], values[2], values[3]
    );
    if let Some(c) = confidence {
        let _ = write!(out, " {c}");
    }
    out.push('\n');
    Ok(())
}

/// Hashes a dataset directory's manifest, labels, and predictions so reports
/// can record exactly which inputs they were computed from.
pub fn dataset_dir_sha256(root: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};

    let mut files: Vec<PathBuf> = vec![root.join("manifest.json")];
    for sub in ["labels", "predictions"] {
        let dir = root.join(sub);
        if dir.is_dir() {
            let mut names: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| Error::io(&dir, e))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            names.sort();
            files.extend(names);
        }
    }

    let mut hasher = Sha256::new();
    for path in files {
        if !path.is_file() {
            continue;
        }
        let rel = path.strip_prefix(root).unwrap_or(&path);
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0u8]);
        let content = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        hasher.update(&content);
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    Ok(out)
}
