//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Training criteria use procedurally generated tiles unless `EUROSAT_DIR`
//! points at a EuroSAT-style directory tree.

mod common;

use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use common::*;
use terracover::data::*;
use terracover::nn::ArchitectureSpec;
use terracover::scanner::{plan_tiling, scan_image};
use terracover::stats::class_shares;
use terracover::training::*;
use terracover::{Rng, Tensor};

struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, name: &str, pass: bool, elapsed: Duration, detail: String) {
        println!("{} {name} [{:.1}s] {detail}", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
        if !pass {
            self.failures += 1;
        }
    }
}

const DESK_CLASSES: [LandCoverClass; 3] = [LandCoverClass::Forest, LandCoverClass::Highway, LandCoverClass::River];

fn desk_samples(per_class: usize, seed: u64) -> (Vec<Sample>, &'static str) {
    if let Some(dir) = std::env::var_os("EUROSAT_DIR") {
        let loaded = load_dataset(&dir).expect("EUROSAT_DIR is not a readable dataset");
        let mut out = Vec::new();
        for class in DESK_CLASSES {
            let mut members: Vec<Sample> = loaded.samples.iter().filter(|s| s.label == class).cloned().collect();
            Rng::new(seed).shuffle(&mut members);
            assert!(members.len() >= per_class, "EUROSAT_DIR has only {} {class} tiles", members.len());
            out.extend(members.into_iter().take(per_class));
        }
        (out, "EuroSAT")
    } else {
        (synthetic_dataset(per_class, &DESK_CLASSES, seed), "synthetic")
    }
}

fn gradients(gate: &mut Gate) {
    let t = Instant::now();
    let mut worst = Vec::new();
    let mut pass = true;
    for case in layer_gradient_suite(1) {
        pass &= case.report.max_rel_error < case.tolerance && case.report.kinks == 0;
        worst.push(format!("{} {:.1e}/{:.0e}", case.name, case.report.max_rel_error, case.tolerance));
    }
    let net = network_gradient_check(&ArchitectureSpec::default(), 3, 200);
    pass &= net.max_rel_error < 1e-3 && net.kinks * 20 <= net.coordinates;
    worst.push(format!(
        "full net {:.1e}/1e-3 over {} coords ({} skipped at kinks)",
        net.max_rel_error, net.coordinates, net.kinks
    ));
    let elapsed = t.elapsed();
    gate.check("gradient fidelity", pass && elapsed < Duration::from_secs(120), elapsed, worst.join("; "));
}

fn oracles(gate: &mut Gate) {
    let t = Instant::now();
    let s = oracle_sweep(200, 7);
    let pass = s.conv < 1e-5 && s.conv_f32 < 1e-5 && s.maxpool < 1e-5 && s.im2col < 1e-5;
    gate.check(
        "oracle equivalence",
        pass,
        t.elapsed(),
        format!(
            "{} shapes; max abs diff conv {:.1e} (f32 {:.1e}), maxpool {:.1e}, im2col {:.1e}; tol 1e-5",
            s.cases, s.conv, s.conv_f32, s.maxpool, s.im2col
        ),
    );
}

fn split_counts(gate: &mut Gate) {
    let labels: Vec<LandCoverClass> = (0..27_000).map(|i| LandCoverClass::ALL[i % 10]).collect();
    let t = Instant::now();
    let s = split_dataset(labels, SplitRatios::default(), 2023).unwrap();
    let elapsed = t.elapsed();
    let per_class: Vec<usize> = LandCoverClass::ALL.iter().map(|c| s.test.iter().filter(|l| *l == c).count()).collect();
    let pass = (s.train.len(), s.validation.len(), s.test.len()) == (21_600, 2_700, 2_700)
        && per_class.iter().all(|&n| n == 270)
        && elapsed < Duration::from_secs(1);
    gate.check(
        "split counts",
        pass,
        elapsed,
        format!("{}/{}/{}, test per class {:?}", s.train.len(), s.validation.len(), s.test.len(), per_class),
    );
}

fn tiling(gate: &mut Gate) {
    let t = Instant::now();
    let p = plan_tiling(10_980, 10_980).unwrap();
    let mut pass = (p.rows(), p.cols()) == (171, 171);
    let mut detail = format!("{}x{}", p.rows(), p.cols());
    for (axis, ext) in [("x", p.col_extents()), ("y", p.row_extents())] {
        let sum: usize = ext.iter().sum();
        let n64 = ext.iter().filter(|&&e| e == 64).count();
        let n65 = ext.iter().filter(|&&e| e == 65).count();
        pass &= sum == 10_980 && n64 + n65 == ext.len();
        detail += &format!("; {axis}: {n64}x64 + {n65}x65 = {sum}");
    }
    gate.check("tiling", pass, t.elapsed(), detail);
}

fn statistics(gate: &mut Gate) {
    let t = Instant::now();
    let mut rng = Rng::new(99);
    let (mut exact, mut worst_sum, mut exclusion_ok) = (true, 0.0f64, true);
    for _ in 0..1000 {
        let (rows, cols) = (1 + rng.below(40), 1 + rng.below(40));
        let m = random_matrix(rows, cols, &mut rng);
        let r0 = rng.below(rows);
        let r1 = r0 + 1 + rng.below(rows - r0);
        let c0 = rng.below(cols);
        let c1 = c0 + 1 + rng.below(cols - c0);
        let region = terracover::Region { r0, r1, c0, c1 };
        let report = class_shares(&m, Some(region), &[]).unwrap();
        let oracle = oracle_counts(&m, r0, r1, c0, c1);
        let total: u64 = oracle.iter().sum();
        for c in LandCoverClass::ALL {
            exact &= report.count(c) == oracle[c.index()];
            exact &= report.share(c) == Some(100.0 * oracle[c.index()] as f64 / total as f64);
        }
        let sum: f64 = report.classes.iter().filter_map(|c| c.share).sum();
        worst_sum = worst_sum.max((sum - 100.0).abs());

        let sea = oracle[LandCoverClass::SeaLake.index()];
        match class_shares(&m, Some(region), &[LandCoverClass::SeaLake]) {
            Ok(ex) => {
                let land = total - sea;
                for c in LandCoverClass::ALL {
                    let want = (c != LandCoverClass::SeaLake).then(|| 100.0 * oracle[c.index()] as f64 / land as f64);
                    exclusion_ok &= ex.share(c) == want && ex.count(c) == oracle[c.index()];
                }
                let s: f64 = ex.classes.iter().filter_map(|c| c.share).sum();
                worst_sum = worst_sum.max((s - 100.0).abs());
            }
            Err(_) => exclusion_ok &= sea == total,
        }
    }
    gate.check(
        "statistics",
        exact && exclusion_ok && worst_sum <= 1e-9,
        t.elapsed(),
        format!("1000 matrices; oracle exact: {exact}; sea-exclusion renormalized: {exclusion_ok}; max |sum-100| {worst_sum:.1e} (tol 1e-9)"),
    );
}

fn overfit(gate: &mut Gate) {
    let samples = synthetic_dataset(7, &LandCoverClass::ALL, 31).into_iter().take(64).collect::<Vec<_>>();
    let split = DatasetSplit { train: samples.clone(), validation: samples, test: Vec::new(), seed: 0 };
    let cfg = TrainingConfig { epochs: 300, learning_rate: 0.001, augment: false, seed: 5, ..Default::default() };
    let t = Instant::now();
    // Validation is the training set, so val_acc is the eval-mode train accuracy.
    let (_, h) = train_with(&cfg, &split, |r| if r.val_acc >= 0.98 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) })
        .unwrap();
    let elapsed = t.elapsed();
    let best = h.best_val_acc().unwrap();
    gate.check(
        "training (a) overfit 64 samples",
        best >= 0.98 && elapsed < Duration::from_secs(600),
        elapsed,
        format!("train accuracy {:.4} after {} epochs (need >= 0.98 within 300, < 600 s)", best, h.len()),
    );
}

fn small_data(gate: &mut Gate) -> (Checkpoint, DatasetSplit) {
    let (samples, source) = desk_samples(300, 17);
    let split = split_dataset(samples, SplitRatios::default(), 17).unwrap();
    let cfg = TrainingConfig { epochs: 15, learning_rate: 0.001, seed: 17, ..Default::default() };
    let t = Instant::now();
    let (ckpt, h) = train(&cfg, &split).unwrap();
    let elapsed = t.elapsed();
    let val = h.best_val_acc().unwrap();
    let test = evaluate(&ckpt, &split.test).unwrap();
    gate.check(
        "training (b) 3 classes x 300",
        val >= 0.70 && elapsed < Duration::from_secs(1200),
        elapsed,
        format!(
            "{source} tiles; best validation accuracy {:.4} (need >= 0.70), test {}; {} epochs, < 1200 s",
            val,
            test.accuracy_percent(),
            h.len()
        ),
    );
    (ckpt, split)
}

fn determinism(gate: &mut Gate, ckpt: &Checkpoint, split: &DatasetSplit) {
    let t = Instant::now();
    let (samples, _) = desk_samples(60, 23);
    let small = split_dataset(samples, SplitRatios::default(), 23).unwrap();
    let cfg = TrainingConfig { epochs: 3, learning_rate: 0.001, seed: 23, ..Default::default() };
    let (ca, ha) = train(&cfg, &small).unwrap();
    let (cb, hb) = train(&cfg, &small).unwrap();
    let same_history = ha.same_trajectory(&hb);
    let same_params = ca.network.params() == cb.network.params();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.snet");
    save_checkpoint(ckpt, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let params_exact = ckpt
        .network
        .params()
        .iter()
        .zip(back.network.params().iter())
        .all(|(a, b)| a.name == b.name && bits(&a.tensor) == bits(&b.tensor));
    let refs: Vec<&Sample> = split.test.iter().take(32).collect();
    let x = stack_normalized(&refs, &ckpt.normalization);
    let logits_exact = bits(&ckpt.logits(&x).unwrap()) == bits(&back.logits(&x).unwrap());
    gate.check(
        "determinism",
        same_history && same_params && params_exact && logits_exact,
        t.elapsed(),
        format!(
            "two runs: loss history identical {same_history}, parameters identical {same_params}; \
             checkpoint round trip: tensors bit-exact {params_exact}, eval logits bit-exact {logits_exact}"
        ),
    );
}

fn end_to_end(gate: &mut Gate, ckpt: &Checkpoint, split: &DatasetSplit) {
    let t = Instant::now();
    let mut rng = Rng::new(4);
    let picks: Vec<Sample> = rng.permutation(split.test.len()).into_iter().take(16).map(|i| split.test[i].clone()).collect();
    let image = stitch(&picks.iter().map(|s| &s.image).collect::<Vec<_>>(), 4, 4).unwrap();
    let m = scan_image(ckpt, &image, "stitched").unwrap();
    let per_tile: Vec<LandCoverClass> = picks
        .iter()
        .map(|s| {
            let r = evaluate(ckpt, std::slice::from_ref(s)).unwrap();
            let row = r.confusion.counts[s.label.index()];
            LandCoverClass::from_index(row.iter().position(|&c| c == 1).unwrap()).unwrap()
        })
        .collect();
    let aligned = (m.rows(), m.cols()) == (4, 4) && m.labels() == &per_tile[..];

    let mut hand = [0u64; NUM_CLASSES];
    per_tile.iter().for_each(|l| hand[l.index()] += 1);
    let report = class_shares(&m, None, &[]).unwrap();
    let shares_ok = LandCoverClass::ALL
        .iter()
        .all(|&c| report.count(c) == hand[c.index()] && report.share(c) == Some(100.0 * hand[c.index()] as f64 / 16.0));
    let correct = picks.iter().zip(&per_tile).filter(|(s, l)| s.label == **l).count();
    gate.check(
        "end-to-end",
        aligned && shares_ok,
        t.elapsed(),
        format!("4x4 scan labels equal per-tile evaluate(): {aligned}; shares equal hand count: {shares_ok}; {correct}/16 tiles correct"),
    );
}

fn main() {
    let started = Instant::now();
    let mut gate = Gate { failures: 0 };
    gradients(&mut gate);
    oracles(&mut gate);
    split_counts(&mut gate);
    tiling(&mut gate);
    statistics(&mut gate);
    overfit(&mut gate);
    let (ckpt, split) = small_data(&mut gate);
    determinism(&mut gate, &ckpt, &split);
    end_to_end(&mut gate, &ckpt, &split);
    println!("acceptance: {} failed, {:.0}s total", gate.failures, started.elapsed().as_secs_f64());
    if gate.failures > 0 {
        std::process::exit(1);
    }
}
