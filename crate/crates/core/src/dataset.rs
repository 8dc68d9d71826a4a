//! Loading region descriptions, object instances and QA triplets from the
//! JSON corpus files into an in-memory [`Dataset`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {} at byte {offset}: {message}", path.display())]
    Json {
        path: PathBuf,
        offset: usize,
        message: String,
    },
}

/// Inclusive pixel-corner box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BoundingBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Self {
        BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Pixel count, edges inclusive.
    pub fn area(&self) -> u64 {
        u64::from(self.x_max - self.x_min + 1) * u64::from(self.y_max - self.y_min + 1)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (f64::from(self.x_min) + f64::from(self.x_max)) / 2.0,
            (f64::from(self.y_min) + f64::from(self.y_max)) / 2.0,
        )
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= f64::from(self.x_min)
            && x <= f64::from(self.x_max)
            && y >= f64::from(self.y_min)
            && y <= f64::from(self.y_max)
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let x0 = self.x_min.max(other.x_min);
        let y0 = self.y_min.max(other.y_min);
        let x1 = self.x_max.min(other.x_max);
        let y1 = self.y_max.min(other.y_max);
        if x0 > x1 || y0 > y1 {
            return 0;
        }
        u64::from(x1 - x0 + 1) * u64::from(y1 - y0 + 1)
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x_min <= self.x_max && self.x_max < width && self.y_min <= self.y_max && self.y_max < height
    }

    /// Convert corner+size to corner coordinates, clamping into the image.
    /// The flag is set when any coordinate had to move.
    pub fn from_corner_size(x: i64, y: i64, w: i64, h: i64, width: u32, height: u32) -> (Self, bool) {
        let (x_min, x_max, cx) = clamp_span(x, x + w - 1, width);
        let (y_min, y_max, cy) = clamp_span(y, y + h - 1, height);
        (BoundingBox::new(x_min, y_min, x_max, y_max), cx || cy)
    }
}

fn clamp_span(lo: i64, hi: i64, extent: u32) -> (u32, u32, bool) {
    let last = i64::from(extent) - 1;
    let c_lo = lo.clamp(0, last);
    let c_hi = hi.clamp(c_lo, last);
    (c_lo as u32, c_hi as u32, c_lo != lo || c_hi != hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAnnotation {
    pub region_id: u64,
    pub phrase: String,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub object_id: u64,
    pub names: Vec<String>,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaTriplet {
    pub qa_id: u64,
    pub image_id: u64,
    pub question: String,
    pub answer: String,
    pub image_width: u32,
    pub image_height: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub triplets: Vec<QaTriplet>,
    pub regions_by_image: BTreeMap<u64, Vec<RegionAnnotation>>,
    pub objects_by_image: BTreeMap<u64, Vec<ObjectAnnotation>>,
}

/// Counters for records that were repaired or dropped while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub clamped_boxes: usize,
    pub dropped_triplets: usize,
    pub dropped_regions: usize,
    pub dropped_objects: usize,
    pub duplicate_ids: usize,
}

// On-disk record shapes.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region_id: u64,
    pub phrase: String,
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionImageRecord {
    pub image_id: u64,
    pub regions: Vec<RegionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub object_id: u64,
    pub names: Vec<String>,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectImageRecord {
    pub image_id: u64,
    pub objects: Vec<ObjectRecord>,
}

pub type QaRecord = QaTriplet;

pub fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json {
        path: path.to_path_buf(),
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// serde_json reports 1-based line and column; turn that into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

pub fn load_qa(path: impl AsRef<Path>) -> Result<Vec<QaTriplet>, DatasetError> {
    read_json_file(path.as_ref())
}

pub fn load_dataset(
    regions_file: impl AsRef<Path>,
    objects_file: impl AsRef<Path>,
    qa_file: impl AsRef<Path>,
) -> Result<(Dataset, IngestReport), DatasetError> {
    let regions: Vec<RegionImageRecord> = read_json_file(regions_file.as_ref())?;
    let objects: Vec<ObjectImageRecord> = read_json_file(objects_file.as_ref())?;
    let qa: Vec<QaRecord> = read_json_file(qa_file.as_ref())?;
    Ok(assemble(regions, objects, qa))
}

/// Build a dataset from already-parsed records, enforcing the invariants.
pub fn assemble(
    regions: Vec<RegionImageRecord>,
    objects: Vec<ObjectImageRecord>,
    qa: Vec<QaRecord>,
) -> (Dataset, IngestReport) {
    let mut report = IngestReport::default();
    let mut known_images: BTreeSet<u64> = BTreeSet::new();
    known_images.extend(regions.iter().map(|r| r.image_id));
    known_images.extend(objects.iter().map(|o| o.image_id));

    let mut dims: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
    let mut triplets = Vec::with_capacity(qa.len());
    let mut qa_ids = HashSet::new();
    for t in qa {
        let valid = known_images.contains(&t.image_id)
            && !t.question.trim().is_empty()
            && !t.answer.trim().is_empty()
            && t.image_width > 0
            && t.image_height > 0;
        if !valid {
            report.dropped_triplets += 1;
            continue;
        }
        if !qa_ids.insert(t.qa_id) {
            report.duplicate_ids += 1;
            continue;
        }
        dims.entry(t.image_id)
            .or_insert((t.image_width, t.image_height));
        triplets.push(t);
    }

    let mut regions_by_image: BTreeMap<u64, Vec<RegionAnnotation>> = BTreeMap::new();
    let mut region_ids = HashSet::new();
    for image in regions {
        let Some(&(w, h)) = dims.get(&image.image_id) else {
            // No QA references this image, so there is nothing to clamp against.
            report.dropped_regions += image.regions.len();
            continue;
        };
        let bucket = regions_by_image.entry(image.image_id).or_default();
        for r in image.regions {
            if r.phrase.trim().is_empty() {
                report.dropped_regions += 1;
                continue;
            }
            if !region_ids.insert(r.region_id) {
                report.duplicate_ids += 1;
                continue;
            }
            let (bbox, clamped) = BoundingBox::from_corner_size(r.x, r.y, r.width, r.height, w, h);
            report.clamped_boxes += usize::from(clamped);
            bucket.push(RegionAnnotation {
                region_id: r.region_id,
                phrase: r.phrase,
                bbox,
            });
        }
    }

    let mut objects_by_image: BTreeMap<u64, Vec<ObjectAnnotation>> = BTreeMap::new();
    let mut object_ids = HashSet::new();
    for image in objects {
        let Some(&(w, h)) = dims.get(&image.image_id) else {
            report.dropped_objects += image.objects.len();
            continue;
        };
        let bucket = objects_by_image.entry(image.image_id).or_default();
        for o in image.objects {
            let names: Vec<String> = o
                .names
                .into_iter()
                .filter(|n| !n.trim().is_empty())
                .collect();
            if names.is_empty() {
                report.dropped_objects += 1;
                continue;
            }
            if !object_ids.insert(o.object_id) {
                report.duplicate_ids += 1;
                continue;
            }
            let (bbox, clamped) = BoundingBox::from_corner_size(o.x, o.y, o.w, o.h, w, h);
            report.clamped_boxes += usize::from(clamped);
            bucket.push(ObjectAnnotation {
                object_id: o.object_id,
                names,
                bbox,
            });
        }
    }

    for t in &triplets {
        regions_by_image.entry(t.image_id).or_default();
        objects_by_image.entry(t.image_id).or_default();
    }

    let dataset = Dataset {
        triplets,
        regions_by_image,
        objects_by_image,
    };
    (dataset, report)
}

impl Dataset {
    pub fn regions(&self, image_id: u64) -> &[RegionAnnotation] {
        self.regions_by_image
            .get(&image_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn objects(&self, image_id: u64) -> &[ObjectAnnotation] {
        self.objects_by_image
            .get(&image_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Inverse of [`assemble`]: the three on-disk record lists.
    pub fn to_records(&self) -> (Vec<RegionImageRecord>, Vec<ObjectImageRecord>, Vec<QaRecord>) {
        let regions = self
            .regions_by_image
            .iter()
            .map(|(&image_id, rs)| RegionImageRecord {
                image_id,
                regions: rs
                    .iter()
                    .map(|r| RegionRecord {
                        region_id: r.region_id,
                        phrase: r.phrase.clone(),
                        x: i64::from(r.bbox.x_min),
                        y: i64::from(r.bbox.y_min),
                        width: i64::from(r.bbox.x_max - r.bbox.x_min + 1),
                        height: i64::from(r.bbox.y_max - r.bbox.y_min + 1),
                    })
                    .collect(),
            })
            .collect();
        let objects = self
            .objects_by_image
            .iter()
            .map(|(&image_id, os)| ObjectImageRecord {
                image_id,
                objects: os
                    .iter()
                    .map(|o| ObjectRecord {
                        object_id: o.object_id,
                        names: o.names.clone(),
                        x: i64::from(o.bbox.x_min),
                        y: i64::from(o.bbox.y_min),
                        w: i64::from(o.bbox.x_max - o.bbox.x_min + 1),
                        h: i64::from(o.bbox.y_max - o.bbox.y_min + 1),
                    })
                    .collect(),
            })
            .collect();
        (regions, objects, self.triplets.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateQaId(u64),
    DuplicateRegionId(u64),
    DuplicateObjectId(u64),
    EmptyQuestionOrAnswer(u64),
    NonPositiveDimensions(u64),
    MissingImage { qa_id: u64, image_id: u64 },
    EmptyPhrase(u64),
    EmptyNames(u64),
    RegionOutOfBounds(u64),
    ObjectOutOfBounds(u64),
}

/// List every invariant the dataset breaks. Empty when the dataset is sound.
pub fn validate(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut dims: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
    let mut seen = HashSet::new();
    for t in &d.triplets {
        if !seen.insert(t.qa_id) {
            out.push(Violation::DuplicateQaId(t.qa_id));
        }
        if t.question.trim().is_empty() || t.answer.trim().is_empty() {
            out.push(Violation::EmptyQuestionOrAnswer(t.qa_id));
        }
        if t.image_width == 0 || t.image_height == 0 {
            out.push(Violation::NonPositiveDimensions(t.qa_id));
        } else {
            dims.entry(t.image_id).or_insert((t.image_width, t.image_height));
        }
        if !d.regions_by_image.contains_key(&t.image_id) || !d.objects_by_image.contains_key(&t.image_id) {
            out.push(Violation::MissingImage {
                qa_id: t.qa_id,
                image_id: t.image_id,
            });
        }
    }
    let mut seen = HashSet::new();
    for (image_id, regions) in &d.regions_by_image {
        for r in regions {
            if !seen.insert(r.region_id) {
                out.push(Violation::DuplicateRegionId(r.region_id));
            }
            if r.phrase.trim().is_empty() {
                out.push(Violation::EmptyPhrase(r.region_id));
            }
            if let Some(&(w, h)) = dims.get(image_id) {
                if !r.bbox.within(w, h) {
                    out.push(Violation::RegionOutOfBounds(r.region_id));
                }
            }
        }
    }
    let mut seen = HashSet::new();
    for (image_id, objects) in &d.objects_by_image {
        for o in objects {
            if !seen.insert(o.object_id) {
                out.push(Violation::DuplicateObjectId(o.object_id));
            }
            if o.names.is_empty() {
                out.push(Violation::EmptyNames(o.object_id));
            }
            if let Some(&(w, h)) = dims.get(image_id) {
                if !o.bbox.within(w, h) {
                    out.push(Violation::ObjectOutOfBounds(o.object_id));
                }
            }
        }
    }
    out
}
