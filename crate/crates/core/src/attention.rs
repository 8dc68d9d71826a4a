//! Grid attention maps built from grounding boxes, plus the kernels used to
//! compare attention with its target and to score answers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BoundingBox, QaTriplet};
use crate::miner::GroundingLabel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("grid dimensions must be positive, got {h}x{w}")]
    EmptyGrid { h: usize, w: usize },
    #[error("image dimensions must be positive, got {w}x{h}")]
    EmptyImage { w: u32, h: u32 },
    #[error("no grounding mass")]
    NoGroundingMass,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("undefined correlation: constant map")]
    UndefinedCorrelation,
    #[error("predicted distribution is zero where the target has mass")]
    UnboundedDivergence,
    #[error("expected 10 reference answers, got {0}")]
    ReferenceCount(usize),
    #[error("label {0} has neither object nor region boxes")]
    EmptyLabel(u64),
    #[error("downsample target {th}x{tw} larger than source {sh}x{sw}")]
    Upsample { sh: usize, sw: usize, th: usize, tw: usize },
}

/// An `h`×`w` grid stored row-major (`values[y * w + x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl AttentionMap {
    pub fn zeros(h: usize, w: usize) -> Self {
        AttentionMap {
            h,
            w,
            values: vec![0.0; h * w],
            normalized: false,
        }
    }

    pub fn from_values(h: usize, w: usize, values: Vec<f64>) -> Result<Self, MapError> {
        if values.len() != h * w {
            return Err(MapError::ShapeMismatch(format!(
                "{} values for a {h}x{w} grid",
                values.len()
            )));
        }
        Ok(AttentionMap {
            h,
            w,
            values,
            normalized: false,
        })
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.w + x]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    fn same_shape(&self, other: &AttentionMap) -> Result<(), MapError> {
        if self.h != other.h || self.w != other.w {
            return Err(MapError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.h, self.w, other.h, other.w
            )));
        }
        Ok(())
    }
}

/// Grid cells `[lo, hi]` along one axis touched by the pixel span
/// `[min_px, max_px]`.
fn cell_span(min_px: u32, max_px: u32, image: u32, cells: usize) -> (usize, usize) {
    let cells = cells as u64;
    let image = u64::from(image);
    let lo = u64::from(min_px) * cells / image;
    let hi = ((u64::from(max_px) + 1) * cells).div_ceil(image);
    let last = cells - 1;
    (lo.min(last) as usize, hi.saturating_sub(1).min(last) as usize)
}

/// Sum of box indicators over an `h`×`w` grid laid over the image. A box
/// covers a cell when its scaled extent overlaps the cell at all.
pub fn rasterize(
    boxes: &[BoundingBox],
    img_w: u32,
    img_h: u32,
    h: usize,
    w: usize,
) -> Result<AttentionMap, MapError> {
    if h == 0 || w == 0 {
        return Err(MapError::EmptyGrid { h, w });
    }
    if img_w == 0 || img_h == 0 {
        return Err(MapError::EmptyImage { w: img_w, h: img_h });
    }
    let mut map = AttentionMap::zeros(h, w);
    for b in boxes {
        let (x_lo, x_hi) = cell_span(b.x_min, b.x_max, img_w, w);
        let (y_lo, y_hi) = cell_span(b.y_min, b.y_max, img_h, h);
        for y in y_lo..=y_hi {
            for cell in &mut map.values[y * w + x_lo..=y * w + x_hi] {
                *cell += 1.0;
            }
        }
    }
    Ok(map)
}

pub fn l1_normalize(m: &AttentionMap) -> Result<AttentionMap, MapError> {
    let total = m.sum();
    if !(total > 0.0) {
        return Err(MapError::NoGroundingMass);
    }
    Ok(AttentionMap {
        h: m.h,
        w: m.w,
        values: m.values.iter().map(|v| v / total).collect(),
        normalized: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlimpseStack {
    pub glimpses: Vec<AttentionMap>,
    pub mask: Vec<bool>,
}

impl GlimpseStack {
    pub fn new(glimpses: Vec<AttentionMap>, mask: Vec<bool>) -> Result<Self, MapError> {
        if glimpses.len() != mask.len() {
            return Err(MapError::ShapeMismatch(format!(
                "{} glimpses with {} mask entries",
                glimpses.len(),
                mask.len()
            )));
        }
        if let Some(first) = glimpses.first() {
            for g in &glimpses[1..] {
                first.same_shape(g)?;
            }
        }
        Ok(GlimpseStack { glimpses, mask })
    }

    /// All glimpses unmasked.
    pub fn unmasked(glimpses: Vec<AttentionMap>) -> Result<Self, MapError> {
        let mask = vec![true; glimpses.len()];
        GlimpseStack::new(glimpses, mask)
    }

    pub fn len(&self) -> usize {
        self.glimpses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glimpses.is_empty()
    }
}

/// Glimpse 0 is the object-level map, glimpse 1 the region-level map. A
/// component without boxes is left as zeros and masked out.
pub fn build_supervision(
    label: &GroundingLabel,
    t: &QaTriplet,
    h: usize,
    w: usize,
) -> Result<GlimpseStack, MapError> {
    if label.object_boxes.is_empty() && label.region_boxes.is_empty() {
        return Err(MapError::EmptyLabel(label.qa_id));
    }
    let component = |boxes: &[BoundingBox], enabled: bool| -> Result<(AttentionMap, bool), MapError> {
        let raw = rasterize(boxes, t.image_width, t.image_height, h, w)?;
        if !enabled || boxes.is_empty() {
            return Ok((AttentionMap::zeros(h, w), false));
        }
        Ok((l1_normalize(&raw)?, true))
    };
    let (objects, obj_on) = component(&label.object_boxes, true)?;
    let (regions, reg_on) = component(&label.region_boxes, !label.is_counting)?;
    GlimpseStack::new(vec![objects, regions], vec![obj_on, reg_on])
}

/// `Σ p·ln(p/q)` over one map, with `0·ln 0 = 0`.
pub fn kl_map(p: &AttentionMap, q: &AttentionMap) -> Result<f64, MapError> {
    p.same_shape(q)?;
    let mut total = 0.0;
    for (&pv, &qv) in p.values.iter().zip(&q.values) {
        if pv > 0.0 {
            if qv <= 0.0 {
                return Err(MapError::UnboundedDivergence);
            }
            total += pv * (pv / qv).ln();
        }
    }
    Ok(total)
}

/// KL summed over the glimpses unmasked in the ground truth `p`.
pub fn kl_divergence(p: &GlimpseStack, q: &GlimpseStack) -> Result<f64, MapError> {
    if p.len() != q.len() {
        return Err(MapError::ShapeMismatch(format!(
            "{} vs {} glimpses",
            p.len(),
            q.len()
        )));
    }
    let mut total = 0.0;
    for ((pg, qg), &on) in p.glimpses.iter().zip(&q.glimpses).zip(&p.mask) {
        pg.same_shape(qg)?;
        if on {
            total += kl_map(pg, qg)?;
        }
    }
    Ok(total)
}

/// 1-based ranks with ties sharing the mean of the positions they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MapError> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(MapError::UndefinedCorrelation);
    }
    Ok((cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman coefficient between the flattened cells of two maps.
pub fn rank_correlation(a: &AttentionMap, b: &AttentionMap) -> Result<f64, MapError> {
    a.same_shape(b)?;
    pearson(&fractional_ranks(&a.values), &fractional_ranks(&b.values))
}

/// Block-mean pooling of a `src_h`×`src_w` row-major grid onto `h`×`w`.
/// Block edges are `floor(i * src / target)`, so uneven sizes are allowed.
pub fn downsample(
    src: &[f64],
    src_h: usize,
    src_w: usize,
    h: usize,
    w: usize,
) -> Result<AttentionMap, MapError> {
    if h == 0 || w == 0 {
        return Err(MapError::EmptyGrid { h, w });
    }
    if src.len() != src_h * src_w {
        return Err(MapError::ShapeMismatch(format!(
            "{} values for a {src_h}x{src_w} grid",
            src.len()
        )));
    }
    if src_h < h || src_w < w {
        return Err(MapError::Upsample {
            sh: src_h,
            sw: src_w,
            th: h,
            tw: w,
        });
    }
    let mut out = AttentionMap::zeros(h, w);
    for y in 0..h {
        let (y0, y1) = (y * src_h / h, (y + 1) * src_h / h);
        for x in 0..w {
            let (x0, x1) = (x * src_w / w, (x + 1) * src_w / w);
            let mut acc = 0.0;
            for sy in y0..y1 {
                acc += src[sy * src_w + x0..sy * src_w + x1].iter().sum::<f64>();
            }
            out.values[y * w + x] = acc / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    Ok(out)
}

/// Lowercase, trim and drop punctuation.
pub fn normalize_answer(answer: &str) -> String {
    answer
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// `min(#matching references / 3, 1)` over exactly ten reference answers.
pub fn vqa_accuracy(pred: &str, refs: &[String]) -> Result<f64, MapError> {
    if refs.len() != 10 {
        return Err(MapError::ReferenceCount(refs.len()));
    }
    let pred = normalize_answer(pred);
    let hits = refs.iter().filter(|r| normalize_answer(r) == pred).count();
    Ok((hits as f64 / 3.0).min(1.0))
}

/// Round to 9 significant digits so printed output is stable.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

/// One NDJSON row per (qa_id, glimpse).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub qa_id: u64,
    pub glimpse: usize,
    pub h: usize,
    pub w: usize,
    pub mask: bool,
    pub values: Vec<f64>,
}

impl MapRecord {
    pub fn from_map(qa_id: u64, glimpse: usize, mask: bool, m: &AttentionMap) -> Self {
        MapRecord {
            qa_id,
            glimpse,
            h: m.h,
            w: m.w,
            mask,
            values: m.values.iter().copied().map(round_sig9).collect(),
        }
    }

    pub fn to_map(&self) -> Result<AttentionMap, MapError> {
        AttentionMap::from_values(self.h, self.w, self.values.clone())
    }
}

pub fn stack_records(qa_id: u64, stack: &GlimpseStack) -> Vec<MapRecord> {
    stack
        .glimpses
        .iter()
        .zip(&stack.mask)
        .enumerate()
        .map(|(g, (m, &on))| MapRecord::from_map(qa_id, g, on, m))
        .collect()
}

pub fn records_to_ndjson(records: &[MapRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("map record serializes"));
        out.push('\n');
    }
    out
}

pub fn records_from_ndjson(text: &str) -> Result<Vec<MapRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Binary 8-bit PGM, each value scaled by the map maximum.
pub fn to_pgm(m: &AttentionMap) -> Vec<u8> {
    let max = m.values.iter().copied().fold(0.0_f64, f64::max);
    let mut out = format!("P5\n{} {}\n255\n", m.w, m.h).into_bytes();
    out.extend(m.values.iter().map(|&v| {
        if max > 0.0 {
            (255.0 * (v.max(0.0) / max)).round() as u8
        } else {
            0
        }
    }));
    out
}
