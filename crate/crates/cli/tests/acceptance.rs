//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary (`harness = false`).

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use groundmine::attention::{
    kl_divergence, kl_map, l1_normalize, rank_correlation, rasterize, vqa_accuracy, AttentionMap, GlimpseStack,
};
use groundmine::dataset::assemble;
use groundmine::miner::{mine, MinerConfig};
use groundmine::schedule::Schedule;
use groundmine_cli::{cmd_mine, cmd_rasterize, cmd_train_toy, Cli, Command};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn parse(args: &[&str]) -> Command {
    let mut argv = vec!["groundmine"];
    argv.extend_from_slice(args);
    Cli::try_parse_from(argv).expect("arguments parse").command
}

fn fx(rel: &str) -> String {
    common::fixture(rel).to_str().unwrap().to_string()
}

fn mine_mini_corpus(out: &Path) -> Result<Vec<groundmine::miner::GroundingLabel>, String> {
    let out = out.to_str().unwrap();
    let (regions, objects, qa) = (fx("mini_corpus/regions.json"), fx("mini_corpus/objects.json"), fx("mini_corpus/qa.json"));
    let (wordnet, aliases) = (fx("wordnet"), fx("aliases.txt"));
    let Command::Mine(a) = parse(&[
        "mine",
        "--regions",
        &regions,
        "--objects",
        &objects,
        "--qa",
        &qa,
        "--wordnet-dir",
        &wordnet,
        "--aliases",
        &aliases,
        "--out",
        out,
    ]) else {
        unreachable!()
    };
    cmd_mine(a).map(|o| o.labels).map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let out = dir.path().join("labels.ndjson");
    let labels = mine_mini_corpus(&out)?;
    let golden = fs::read(common::fixture("mini_corpus/expected_labels.ndjson")).map_err(|e| e.to_string())?;
    ensure(fs::read(&out).map_err(|e| e.to_string())? == golden, "labels differ from golden file")?;

    let talking = labels.iter().find(|l| l.qa_id == 1).ok_or("no label for the talking question")?;
    ensure(talking.region_match_count == 2, format!("match count {}", talking.region_match_count))?;
    ensure(talking.region_boxes.len() == 1, "expected exactly the men-talking region")?;
    let b = talking.region_boxes[0];
    ensure((b.x_min, b.y_min) == (120, 90), format!("selected region {b:?}"))?;

    let counting = labels.iter().find(|l| l.qa_id == 2).ok_or("no label for the counting question")?;
    ensure(counting.is_counting, "qa 2 not flagged as counting")?;
    ensure(counting.region_boxes.is_empty() && !counting.object_boxes.is_empty(), "counting label must keep objects only")?;

    let maps = dir.path().join("maps.ndjson");
    let Command::Rasterize(a) = parse(&[
        "rasterize",
        "--labels",
        out.to_str().unwrap(),
        "--qa",
        &fx("mini_corpus/qa.json"),
        "--out",
        maps.to_str().unwrap(),
    ]) else {
        unreachable!()
    };
    let records = cmd_rasterize(a).map_err(|e| e.to_string())?;
    let masks: Vec<bool> = records.iter().filter(|r| r.qa_id == 2).map(|r| r.mask).collect();
    ensure(masks == [true, false], format!("counting masks {masks:?}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("golden match, region count 2, counting masks [true, false], {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let lex = common::fixture_lexicon();
    let cfg = MinerConfig::default();
    let vocab = common::mining_vocab();
    ensure(vocab.len() == 50, format!("vocabulary has {} words", vocab.len()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut labels = 0;
    for case in 0..200 {
        let (r, o, q) = common::random_corpus(&mut rng, &vocab);
        let (d, _) = assemble(r, o, q);
        let over = d.regions_by_image.keys().chain(d.objects_by_image.keys()).any(|&img| {
            d.regions(img).len() + d.objects(img).len() > common::MAX_ANNOTATIONS
        });
        ensure(!over, format!("corpus {case} exceeds {} annotations per image", common::MAX_ANNOTATIONS))?;
        let got = mine(&d, &lex, &cfg);
        let want = common::brute_force_mine(&d, &lex, &cfg);
        ensure(common::strip_words(&got) == want, format!("corpus {case} differs from brute force"))?;
        labels += got.len();
    }
    Ok(format!("200 corpora agree, {labels} labels"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_sum: f64 = 0.0;
    for case in 0..500 {
        let (boxes, img_w, img_h, h, w) = common::random_case(&mut rng);
        let got = rasterize(&boxes, img_w, img_h, h, w).map_err(|e| e.to_string())?;
        let want = common::rasterize_oracle(&boxes, img_w, img_h, h, w);
        ensure(got.values == want, format!("case {case}: cells differ from oracle"))?;
        let n = l1_normalize(&got).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((n.sum() - 1.0).abs());

        let split = rng.random_range(0..=boxes.len());
        let left = rasterize(&boxes[..split], img_w, img_h, h, w).map_err(|e| e.to_string())?;
        let right = rasterize(&boxes[split..], img_w, img_h, h, w).map_err(|e| e.to_string())?;
        let added: Vec<f64> = left.values.iter().zip(&right.values).map(|(a, b)| a + b).collect();
        ensure(added == got.values, format!("case {case}: not additive"))?;

        let mut shuffled = boxes.clone();
        shuffled.shuffle(&mut rng);
        let perm = rasterize(&shuffled, img_w, img_h, h, w).map_err(|e| e.to_string())?;
        ensure(perm.values == got.values, format!("case {case}: order dependent"))?;
    }
    ensure(worst_sum <= 1e-9, format!("normalized sum off by {worst_sum:e}"))?;
    Ok(format!("500 cases, worst normalized sum error {worst_sum:.1e}"))
}

fn criterion_4() -> Outcome {
    let t_max = 190_000;
    let s = Schedule::cosine(t_max).map_err(|e| e.to_string())?;
    ensure((s.alpha(0) - 1.0).abs() <= 1e-12, format!("alpha(0) = {}", s.alpha(0)))?;
    ensure(s.alpha(t_max).abs() <= 1e-12, format!("alpha(t_max) = {}", s.alpha(t_max)))?;
    ensure((s.alpha(t_max / 2) - 0.5).abs() <= 1e-12, format!("alpha(t_max/2) = {}", s.alpha(t_max / 2)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ts: Vec<u64> = (0..1000).map(|_| rng.random_range(0..=t_max)).collect();
    ts.sort_unstable();
    let monotone = ts.windows(2).all(|p| s.alpha(p[1]) <= s.alpha(p[0]));
    ensure(monotone, "alpha increases somewhere")?;
    Ok("endpoints within 1e-12, monotone over 1000 sampled steps".to_string())
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let fixed = Schedule::fixed(1.0).map_err(|e| e.to_string())?;
    let cosine = Schedule::cosine(100).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let (sched, t) = if seed % 2 == 0 { (&fixed, 0) } else { (&cosine, seed * 4) };
        worst = worst.max(common::max_gradient_error(seed, sched, t));
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-5, format!("max relative error {worst:.3e}"))?;
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("max relative error {worst:.2e} over 20 cases, {elapsed:.1?}"))
}

fn train_final_rank(dir: &Path, alpha: &str) -> Result<(f64, Duration), String> {
    let metrics = dir.join(format!("alpha{alpha}.csv"));
    let Command::TrainToy(a) = parse(&[
        "train-toy",
        "--alpha-mode",
        "fixed",
        "--alpha-value",
        alpha,
        "--seed",
        "7",
        "--metrics",
        metrics.to_str().unwrap(),
    ]) else {
        unreachable!()
    };
    let start = Instant::now();
    let out = cmd_train_toy(a).map_err(|e| e.to_string())?;
    let last = out.metrics.last().ok_or("no metrics")?;
    Ok((last.rank_corr, start.elapsed()))
}

fn criterion_6() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let (supervised, t1) = train_final_rank(dir.path(), "1")?;
    let (plain, t0) = train_final_rank(dir.path(), "0")?;
    let limit = Duration::from_secs(120);
    ensure(t1 < limit && t0 < limit, format!("runs took {t1:?} and {t0:?}"))?;
    let gap = supervised - plain;
    let detail = format!("rank_corr alpha=1 {supervised:.3}, alpha=0 {plain:.3}, gap {gap:.3}");
    ensure(gap >= 0.2, detail.clone())?;
    Ok(format!("{detail}, runs {t1:.1?} / {t0:.1?}"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (h, w) = (14, 14);
        let levels = rng.random_range(2..=40);
        let a = common::random_map(&mut rng, h, w, levels);
        let b = common::random_map(&mut rng, h, w, levels);
        let got = rank_correlation(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((got - common::spearman_oracle(&a.values, &b.values)).abs());
    }
    ensure(worst <= 1e-9, format!("Spearman off by {worst:e}"))?;

    let a = AttentionMap::from_values(3, 4, (0..12).map(|i| (i * 7 % 12) as f64 + 0.5).collect()).unwrap();
    let reversed = AttentionMap::from_values(3, 4, a.values.iter().map(|v| 20.0 - v).collect()).unwrap();
    let same = rank_correlation(&a, &a).map_err(|e| e.to_string())?;
    let rev = rank_correlation(&a, &reversed).map_err(|e| e.to_string())?;
    ensure(same == 1.0, format!("identical maps give {same}"))?;
    ensure(rev == -1.0, format!("reversed maps give {rev}"))?;

    for k in 0..=10usize {
        let refs: Vec<String> = (0..10).map(|i| if i < k { "yes" } else { "no" }.to_string()).collect();
        let got = vqa_accuracy("yes", &refs).map_err(|e| e.to_string())?;
        let want = (k as f64 / 3.0).min(1.0);
        ensure(got == want, format!("k = {k}: accuracy {got}, want {want}"))?;
    }
    Ok(format!("Spearman worst error {worst:.1e}, extremes exact, accuracy exact for k = 0..10"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = AttentionMap::from_values(14, 14, common::random_distribution(&mut rng, 196, false)).unwrap();
    let stack = GlimpseStack::unmasked(vec![p.clone(), p.clone()]).map_err(|e| e.to_string())?;
    let self_kl = kl_divergence(&stack, &stack).map_err(|e| e.to_string())?;
    ensure(self_kl.abs() <= 1e-12, format!("kl(p, p) = {self_kl:e}"))?;

    let mut point = vec![0.0; 196];
    point[97] = 1.0;
    let point = AttentionMap::from_values(14, 14, point).unwrap();
    let uniform = AttentionMap::from_values(14, 14, vec![1.0 / 196.0; 196]).unwrap();
    let pu = kl_map(&point, &uniform).map_err(|e| e.to_string())?;
    ensure((pu - 196f64.ln()).abs() <= 1e-9, format!("point vs uniform {pu}"))?;

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=196);
        let a = common::random_distribution(&mut rng, n, true);
        let b = common::random_distribution(&mut rng, n, false);
        let got = kl_map(
            &AttentionMap::from_values(1, n, a.clone()).unwrap(),
            &AttentionMap::from_values(1, n, b.clone()).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max((got - common::kl_oracle(&a, &b)).abs());
    }
    ensure(worst <= 1e-12, format!("KL off by {worst:e}"))?;
    Ok(format!("kl(p,p) {self_kl:.1e}, point vs uniform {pu:.10}, worst oracle error {worst:.1e}"))
}

fn read_all(paths: &[&Path]) -> Result<Vec<Vec<u8>>, String> {
    paths.iter().map(|p| fs::read(p).map_err(|e| format!("{}: {e}", p.display()))).collect()
}

fn criterion_9() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let labels = dir.path().join("labels.ndjson");
    let labels_manifest = dir.path().join("labels.ndjson.manifest.json");
    let mut mined = Vec::new();
    for _ in 0..2 {
        mine_mini_corpus(&labels)?;
        mined.push(read_all(&[&labels, &labels_manifest])?);
    }
    ensure(mined[0] == mined[1], "cmd_mine outputs differ between runs")?;

    let metrics = dir.path().join("metrics.csv");
    let params = dir.path().join("params.ndjson");
    let manifest = dir.path().join("metrics.csv.manifest.json");
    let mut trained = Vec::new();
    for _ in 0..2 {
        let Command::TrainToy(a) = parse(&[
            "train-toy",
            "--seed",
            "7",
            "--steps",
            "200",
            "--metrics",
            metrics.to_str().unwrap(),
            "--params",
            params.to_str().unwrap(),
        ]) else {
            unreachable!()
        };
        cmd_train_toy(a).map_err(|e| e.to_string())?;
        trained.push(read_all(&[&metrics, &params, &manifest])?);
    }
    ensure(trained[0] == trained[1], "cmd_train_toy outputs differ between runs")?;
    Ok("mine and train-toy outputs and manifests byte-identical across runs".to_string())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("golden mini-corpus mining", criterion_1),
        ("mining equals brute-force reference", criterion_2),
        ("rasterization oracle", criterion_3),
        ("cosine schedule", criterion_4),
        ("gradient check", criterion_5),
        ("supervision raises rank correlation", criterion_6),
        ("metric kernels", criterion_7),
        ("KL divergence", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

