//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use groundmine::attention::AttentionMap;
use groundmine::dataset::{
    BoundingBox, Dataset, ObjectImageRecord, ObjectRecord, QaRecord, RegionImageRecord, RegionRecord,
};
use groundmine::lexicon::{normalize_token, Lexicon, MatchCondition, Pos};
use groundmine::miner::{GroundingLabel, MinerConfig};
use groundmine::schedule::Schedule;
use groundmine::toy::{loss_and_grads, make_synthetic, ToyConfig, ToyModelParams, ToySample};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(rel: &str) -> PathBuf {
    workspace_root().join("fixtures").join(rel)
}

pub fn fixture_lexicon() -> Lexicon {
    let mut lex = Lexicon::load_wordnet(fixture("wordnet")).expect("fixture wordnet loads");
    lex.load_aliases(fixture("aliases.txt")).expect("fixture aliases load");
    lex
}

/// Full WordNet 3.0 dict directory, if one is available on this machine.
pub fn full_wordnet_dir() -> Option<PathBuf> {
    let candidates = [
        std::env::var("GROUNDMINE_WORDNET_DIR").ok().map(PathBuf::from),
        Some(PathBuf::from("/root/wordnet")),
        Some(PathBuf::from("/usr/share/wordnet")),
    ];
    candidates
        .into_iter()
        .flatten()
        .find(|p| p.join("index.noun").is_file())
}

// ---------------------------------------------------------------------------
// Rasterization: a cell is covered when the pixel rectangle it spans overlaps
// the box's pixel rectangle [x_min, x_max + 1) x [y_min, y_max + 1).

pub fn covers(b: &BoundingBox, img_w: u32, img_h: u32, h: usize, w: usize, y: usize, x: usize) -> bool {
    let (iw, ih) = (img_w as f64, img_h as f64);
    let cell_x0 = x as f64 * iw / w as f64;
    let cell_x1 = (x + 1) as f64 * iw / w as f64;
    let cell_y0 = y as f64 * ih / h as f64;
    let cell_y1 = (y + 1) as f64 * ih / h as f64;
    let overlap_x = cell_x0 < (b.x_max + 1) as f64 && cell_x1 > b.x_min as f64;
    let overlap_y = cell_y0 < (b.y_max + 1) as f64 && cell_y1 > b.y_min as f64;
    overlap_x && overlap_y
}

pub fn rasterize_oracle(boxes: &[BoundingBox], img_w: u32, img_h: u32, h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = boxes.iter().filter(|b| covers(b, img_w, img_h, h, w, y, x)).count() as f64;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Spearman: naive O(n^2) midranks, then textbook Pearson.

pub fn naive_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (naive_ranks(a), naive_ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

// ---------------------------------------------------------------------------
// KL: direct summation with log differences.

pub fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pv, _)| **pv != 0.0)
        .map(|(pv, qv)| pv * (pv.ln() - qv.ln()))
        .sum()
}

// ---------------------------------------------------------------------------
// Central finite differences of the training loss. The loss is recomputed by
// an independent forward pass in 128-bit floats and the perturbation is
// applied at that precision, so the only error left is the O(h^2) truncation.

type Hp = FBig<HalfEven, 2>;
const HP_BITS: usize = 128;

fn hp(x: f64) -> Hp {
    Hp::try_from(x).expect("finite input").with_precision(HP_BITS).value()
}

fn hp_softmax(xs: &[Hp]) -> Vec<Hp> {
    let max = xs.iter().max().expect("non-empty").clone();
    let exps: Vec<Hp> = xs.iter().map(|x| (x - &max).exp()).collect();
    let sum = exps.iter().fold(hp(0.0), |a, b| a + b);
    exps.iter().map(|e| e / &sum).collect()
}

/// `ce + alpha·kl` with parameter `(tensor, index)` shifted by `delta`.
pub fn reference_loss(p: &ToyModelParams, s: &ToySample, alpha: f64, shift: Option<(usize, usize, &Hp)>) -> Hp {
    let cfg = &p.cfg;
    let (c, d, g, k) = (cfg.c, cfg.d, cfg.glimpses, cfg.k);
    let cells = cfg.h * cfg.w;
    let mut t: Vec<Vec<Hp>> = p.tensors().iter().map(|v| v.iter().map(|&x| hp(x)).collect()).collect();
    if let Some((ti, i, delta)) = shift {
        t[ti][i] = &t[ti][i] + delta;
    }
    let (w_q, bias, w_attn, w_cls) = (&t[0], &t[1], &t[2], &t[3]);
    let q: Vec<Hp> = s.q_feat.iter().map(|&x| hp(x)).collect();
    let img: Vec<Hp> = s.img_feat.iter().map(|&x| hp(x)).collect();
    let zero = hp(0.0);

    let proj: Vec<Hp> = (0..c)
        .map(|i| (0..d).fold(hp(0.0), |a, j| a + &w_q[i * d + j] * &q[j]))
        .collect();
    // fused[n][ch] = relu(proj[ch]·img[ch][n] + bias[ch])
    let fused: Vec<Vec<Hp>> = (0..cells)
        .map(|n| {
            (0..c)
                .map(|ch| {
                    let v = &proj[ch] * &img[ch * cells + n] + &bias[ch];
                    if v > zero { v } else { hp(0.0) }
                })
                .collect()
        })
        .collect();
    let attn: Vec<Vec<Hp>> = (0..g)
        .map(|gi| {
            let scores: Vec<Hp> = (0..cells)
                .map(|n| (0..c).fold(hp(0.0), |a, ch| a + &w_attn[gi * c + ch] * &fused[n][ch]))
                .collect();
            hp_softmax(&scores)
        })
        .collect();
    let mut feats: Vec<Hp> = q.clone();
    for a in &attn {
        for ch in 0..c {
            feats.push((0..cells).fold(hp(0.0), |acc, n| acc + &a[n] * &img[ch * cells + n]));
        }
    }
    let width = feats.len();
    let logits: Vec<Hp> = (0..k)
        .map(|ki| (0..width).fold(hp(0.0), |a, j| a + &w_cls[ki * width + j] * &feats[j]))
        .collect();
    let sum_exp = logits.iter().fold(hp(0.0), |a, l| a + l.exp());
    let ce = sum_exp.ln() - &logits[s.answer];

    let Some(sup) = &s.supervision else { return ce };
    let mut kl = hp(0.0);
    for gi in 0..g {
        if !sup.mask[gi] {
            continue;
        }
        for (n, &target) in sup.glimpses[gi].values.iter().enumerate() {
            if target > 0.0 {
                let pt = hp(target);
                kl = kl + &pt * (pt.ln() - attn[gi][n].ln());
            }
        }
    }
    ce + hp(alpha) * kl
}

pub fn numeric_grads(p: &ToyModelParams, s: &ToySample, sched: &Schedule, t: u64, h: f64) -> Vec<Vec<f64>> {
    let alpha = if s.supervision.is_some() { sched.alpha(t) } else { 0.0 };
    let plus = hp(h);
    let minus = hp(-h);
    let two_h = hp(2.0 * h);
    let mut out = Vec::new();
    for ti in 0..4 {
        let len = p.tensors()[ti].len();
        let grads = (0..len)
            .map(|i| {
                let fp = reference_loss(p, s, alpha, Some((ti, i, &plus)));
                let fm = reference_loss(p, s, alpha, Some((ti, i, &minus)));
                ((fp - fm) / &two_h).to_f64().value()
            })
            .collect();
        out.push(grads);
    }
    out
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

// ---------------------------------------------------------------------------
// Brute-force miner: enumerates every (annotation word, query word) pair and
// applies the four match conditions from the lexicon's primitive lookups.

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(normalize_token).filter(|t| !t.is_empty()).collect()
}

fn known(lex: &Lexicon, w: &str) -> bool {
    Pos::ALL.iter().any(|&p| lex.morphy(w, p).is_some())
}

fn informative(lex: &Lexicon, cfg: &MinerConfig, text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for w in words(text) {
        if cfg.stopwords.contains(&w) || !known(lex, &w) || out.contains(&w) {
            continue;
        }
        out.push(w);
    }
    out
}

/// The conditions that hold for a pair, checked independently of each other.
pub fn conditions(lex: &Lexicon, a: &str, b: &str, pos: &[Pos]) -> BTreeSet<MatchCondition> {
    let mut out = BTreeSet::new();
    if a == b {
        out.insert(MatchCondition::Raw);
    }
    for &p in pos {
        if let (Some(x), Some(y)) = (lex.morphy(a, p), lex.morphy(b, p)) {
            if x == y {
                out.insert(MatchCondition::Lemma);
            }
        }
    }
    let syn = |w: &str| -> BTreeSet<(Pos, u32)> {
        let mut s = BTreeSet::new();
        for &p in pos {
            let mut forms = vec![w.to_string()];
            forms.extend(lex.morphy(w, p));
            for f in forms {
                s.extend(lex.index_offsets(&f, p).iter().map(|&o| (p, o)));
            }
        }
        s
    };
    if !syn(a).is_disjoint(&syn(b)) {
        out.insert(MatchCondition::Synset);
    }
    let forms = |w: &str| -> Vec<String> {
        let mut f = vec![w.to_string()];
        f.extend(pos.iter().filter_map(|&p| lex.morphy(w, p)));
        f
    };
    for fa in forms(a) {
        for fb in forms(b) {
            if lex.aliases_of(&fa).is_some_and(|s| s.contains(&fb)) {
                out.insert(MatchCondition::Alias);
            }
        }
    }
    out
}

pub fn brute_force_mine(d: &Dataset, lex: &Lexicon, cfg: &MinerConfig) -> Vec<GroundingLabel> {
    let both = [Pos::Noun, Pos::Verb];
    let mut labels = Vec::new();
    for t in &d.triplets {
        let mut query = informative(lex, cfg, &t.question);
        for w in informative(lex, cfg, &t.answer) {
            if !query.contains(&w) {
                query.push(w);
            }
        }
        let nouns: Vec<String> = query.iter().filter(|w| lex.morphy(w, Pos::Noun).is_some()).cloned().collect();

        // Regions: count annotation words with at least one matching query word.
        let regions = d.regions(t.image_id);
        let counts: Vec<usize> = regions
            .iter()
            .map(|r| {
                informative(lex, cfg, &r.phrase)
                    .iter()
                    .filter(|aw| query.iter().any(|qw| !conditions(lex, aw, qw, &both).is_empty()))
                    .count()
            })
            .collect();
        let best = counts.iter().copied().max().unwrap_or(0);
        let selected: Vec<BoundingBox> = if best >= cfg.min_region_matches {
            regions.iter().zip(&counts).filter(|(_, &c)| c == best).map(|(r, _)| r.bbox).collect()
        } else {
            Vec::new()
        };

        // Objects: best condition over every name x noun pair.
        let mut cands: Vec<(u8, u64, usize, BoundingBox)> = Vec::new();
        for (i, o) in d.objects(t.image_id).iter().enumerate() {
            let mut best_cond: Option<MatchCondition> = None;
            for name in &o.names {
                let name = normalize_token(name);
                for n in &nouns {
                    if let Some(c) = conditions(lex, &name, n, &[Pos::Noun]).into_iter().next() {
                        best_cond = Some(best_cond.map_or(c, |b| b.min(c)));
                    }
                }
            }
            let Some(c) = best_cond else { continue };
            let inside = selected.is_empty()
                || selected.iter().any(|r| {
                    let cx = (o.bbox.x_min as f64 + o.bbox.x_max as f64) / 2.0;
                    let cy = (o.bbox.y_min as f64 + o.bbox.y_max as f64) / 2.0;
                    cx >= r.x_min as f64 && cx <= r.x_max as f64 && cy >= r.y_min as f64 && cy <= r.y_max as f64
                });
            if inside {
                cands.push((c as u8, o.bbox.area(), i, o.bbox));
            }
        }
        cands.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        let mut kept: Vec<BoundingBox> = Vec::new();
        for (_, _, _, b) in cands {
            if kept.iter().all(|k| iou_oracle(k, &b) < cfg.iou_threshold) {
                kept.push(b);
            }
        }

        let q = words(&t.question).join(" ");
        let counting = cfg.counting_prefixes.iter().any(|p| {
            let p = words(p).join(" ");
            q == p || q.starts_with(&format!("{p} "))
        });
        let region_boxes = if counting { Vec::new() } else { selected };
        if region_boxes.is_empty() && kept.is_empty() {
            continue;
        }
        labels.push(GroundingLabel {
            qa_id: t.qa_id,
            image_id: t.image_id,
            region_boxes,
            object_boxes: kept,
            is_counting: counting,
            region_match_count: best,
            matched_words: Vec::new(),
        });
    }
    labels
}

/// IoU by counting covered pixels.
pub fn iou_oracle(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inside = |bx: &BoundingBox, x: u32, y: u32| x >= bx.x_min && x <= bx.x_max && y >= bx.y_min && y <= bx.y_max;
    let x1 = a.x_max.max(b.x_max);
    let y1 = a.y_max.max(b.y_max);
    let (mut inter, mut union) = (0u64, 0u64);
    for y in a.y_min.min(b.y_min)..=y1 {
        for x in a.x_min.min(b.x_min)..=x1 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    inter as f64 / union as f64
}

// ---------------------------------------------------------------------------
// Random small corpora over the fixture vocabulary.

const FILLER: &[&str] = &["a", "the", "on", "of", "is", "what", "blue", "near", "by"];

pub fn mining_vocab() -> Vec<String> {
    let text = std::fs::read_to_string(fixture("wordnet/VOCAB")).unwrap();
    let words: Vec<String> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(str::to_string)
        .collect();
    words.into_iter().take(50).collect()
}

pub fn sentence(rng: &mut impl Rng, vocab: &[String], len: usize) -> String {
    (0..len)
        .map(|_| {
            if rng.random_bool(0.25) {
                FILLER.choose(rng).unwrap().to_string()
            } else {
                vocab.choose(rng).unwrap().clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Regions plus objects per image.
pub const MAX_ANNOTATIONS: usize = 20;

pub fn random_corpus(rng: &mut impl Rng, vocab: &[String]) -> (Vec<RegionImageRecord>, Vec<ObjectImageRecord>, Vec<QaRecord>) {
    let images = rng.random_range(1..=3u64);
    let (mut regions, mut objects, mut qa) = (Vec::new(), Vec::new(), Vec::new());
    let mut next_id = 1u64;
    for image_id in 0..images {
        let (w, h) = (rng.random_range(50..400u32), rng.random_range(50..400u32));
        let rect = |rng: &mut dyn rand::RngCore| {
            let x = rng.random_range(0..w as i64);
            let y = rng.random_range(0..h as i64);
            (x, y, rng.random_range(1..=w as i64 - x), rng.random_range(1..=h as i64 - y))
        };
        let n_regions = rng.random_range(0..=10);
        let n_objects = rng.random_range(0..=(MAX_ANNOTATIONS - n_regions));
        let mut rs = Vec::new();
        for _ in 0..n_regions {
            let (x, y, bw, bh) = rect(rng);
            let len = rng.random_range(1..=5);
            rs.push(RegionRecord {
                region_id: next_id,
                phrase: sentence(rng, vocab, len),
                x,
                y,
                width: bw,
                height: bh,
            });
            next_id += 1;
        }
        let mut os = Vec::new();
        for _ in 0..n_objects {
            if rs.len() + os.len() == MAX_ANNOTATIONS {
                break;
            }
            let (x, y, bw, bh) = rect(rng);
            let names = (0..rng.random_range(1..=2)).map(|_| vocab.choose(rng).unwrap().clone()).collect();
            os.push(ObjectRecord {
                object_id: next_id,
                names,
                x,
                y,
                w: bw,
                h: bh,
            });
            next_id += 1;
            // Near-duplicate labels exercise the IoU filter.
            if rs.len() + os.len() < MAX_ANNOTATIONS && rng.random_bool(0.2) {
                let mut dup = os.last().unwrap().clone();
                dup.object_id = next_id;
                dup.w = (dup.w - 1).max(1);
                os.push(dup);
                next_id += 1;
            }
        }
        regions.push(RegionImageRecord { image_id, regions: rs });
        objects.push(ObjectImageRecord { image_id, objects: os });
        for _ in 0..rng.random_range(1..=3) {
            let q_len = rng.random_range(1..=4);
            let mut question = sentence(rng, vocab, q_len);
            if rng.random_bool(0.3) {
                question = format!("How many {question}?");
            }
            qa.push(QaRecord {
                qa_id: next_id,
                image_id,
                question,
                answer: {
                    let len = rng.random_range(1..=2);
                    sentence(rng, vocab, len)
                },
                image_width: w,
                image_height: h,
            });
            next_id += 1;
        }
    }
    (regions, objects, qa)
}

pub fn strip_words(labels: &[GroundingLabel]) -> Vec<GroundingLabel> {
    labels
        .iter()
        .cloned()
        .map(|mut l| {
            l.matched_words.clear();
            l
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Gradient check cases.

pub fn gradient_cfg() -> ToyConfig {
    ToyConfig {
        d: 4,
        c: 5,
        h: 3,
        w: 4,
        glimpses: 2,
        k: 3,
        o: 5,
        seed: 0,
        steps: 0,
        learning_rate: 0.1,
    }
}

pub fn max_gradient_error(seed: u64, sched: &Schedule, t: u64) -> f64 {
    let cfg = gradient_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ToyModelParams::random(&cfg, &mut rng, 1.0);
    let mut sample = make_synthetic(&cfg, 1, seed).unwrap().remove(0);
    // Random dense inputs so every ReLU and softmax path is exercised.
    for v in sample.img_feat.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let (_, analytic) = loss_and_grads(&params, &sample, sched, t).unwrap();
    let numeric = numeric_grads(&params, &sample, sched, t, 1e-6);
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.tensors().iter().zip(&numeric) {
        for (x, y) in a.iter().zip(n) {
            worst = worst.max(relative_error(*x, *y));
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Random boxes, maps and distributions.

pub fn random_box(rng: &mut impl Rng, img_w: u32, img_h: u32) -> BoundingBox {
    let (x0, x1) = (rng.random_range(0..img_w), rng.random_range(0..img_w));
    let (y0, y1) = (rng.random_range(0..img_h), rng.random_range(0..img_h));
    BoundingBox::new(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1))
}

pub fn random_case(rng: &mut impl Rng) -> (Vec<BoundingBox>, u32, u32, usize, usize) {
    let img_w = rng.random_range(1..=640);
    let img_h = rng.random_range(1..=640);
    let h = rng.random_range(1..=16);
    let w = rng.random_range(1..=16);
    let n = rng.random_range(1..=6);
    let boxes = (0..n).map(|_| random_box(rng, img_w, img_h)).collect();
    (boxes, img_w, img_h, h, w)
}

pub fn random_map(rng: &mut impl Rng, h: usize, w: usize, levels: u32) -> AttentionMap {
    // Few levels so ties are common.
    let values = (0..h * w).map(|_| rng.random_range(0..levels) as f64 * 0.25).collect();
    AttentionMap::from_values(h, w, values).unwrap()
}

pub fn random_distribution(rng: &mut impl Rng, n: usize, sparse: bool) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| if sparse && rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.01..1.0) })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return v;
    }
    raw.iter().map(|v| v / total).collect()
}
