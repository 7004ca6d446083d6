//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use lgpca::classifier::{self, ClassLibrary};
use lgpca::config::PipelineConfig;
use lgpca::detector::{BoundingBox, Detection};
use lgpca::evaluation::{self, CountsRow};
use lgpca::loggabor::{self, LogGaborBankParams};
use lgpca::pipeline;
use lgpca::subspace;
use lgpca::synth;
use lgpca::tracker::{self, Track, Tracker, TrackerParams};
use rand::Rng;

struct Outcome {
    pass: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, note: impl Into<String>) {
        let note = note.into();
        if !ok {
            self.pass = false;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }

    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.check(
            elapsed < limit,
            format!("runtime {:.2}s < {}s", elapsed.as_secs_f64(), limit.as_secs_f64()),
        );
    }
}

fn table_arithmetic() -> Outcome {
    let start = Instant::now();
    let mut o = Outcome::new();
    for ((c, i), want) in [((43, 7), 86.0), ((23, 2), 92.0), ((24, 1), 96.0)] {
        let got = evaluation::accuracy_percent(c, i).unwrap();
        o.check(got == want, format!("accuracy({c},{i}) = {got} (want {want})"));
    }
    let overall = evaluation::overall_accuracy(&[88.0, 86.0, 92.0, 96.0]).unwrap();
    o.check(overall == 90.5, format!("overall([88,86,92,96]) = {overall}"));
    let rows = vec![
        CountsRow { sequence: "Arial Fig 3".into(), correct: 25, incorrect: 3, printed_accuracy: Some(88.0) },
        CountsRow { sequence: "OTCBVS Fig 7(a)".into(), correct: 43, incorrect: 7, printed_accuracy: Some(86.0) },
        CountsRow { sequence: "Fig 8(a)".into(), correct: 23, incorrect: 2, printed_accuracy: Some(92.0) },
        CountsRow { sequence: "Fig 8(b)".into(), correct: 24, incorrect: 1, printed_accuracy: Some(96.0) },
    ];
    let report = evaluation::build_report(&rows).unwrap();
    let arial = &report.rows[0];
    o.check(
        arial.accuracy == 89.3 && arial.flagged && report.rows[1..].iter().all(|r| !r.flagged),
        format!("Arial recomputes to {} and is flagged: {}", arial.accuracy, arial.flagged),
    );
    o.check(report.to_text().contains("(printed 88.0)"), "report text marks the printed 88");
    o.within(start.elapsed(), Duration::from_millis(500));
    o
}

fn filter_invariants() -> Outcome {
    let start = Instant::now();
    let mut o = Outcome::new();
    let bank = loggabor::build_bank(LogGaborBankParams::default(), 64, 64).unwrap();
    o.check(bank.len() == 24, format!("{} filters", bank.len()));
    let dc_ok = bank.filters.iter().all(|f| f.dc_gain() == 0.0);
    o.check(dc_ok, "every DC gain is exactly 0");
    let max = bank.filters.iter().map(|f| f.max_gain()).fold(0.0, f64::max);
    o.check(max <= 1.0 + 1e-12, format!("max gain {max:.15}"));
    let octaves = loggabor::octave_bandwidth(0.55);
    o.check(
        (1.93..=2.03).contains(&octaves),
        format!("half-gain spread for sigma_ratio 0.55 = {octaves:.4} octaves, required [1.93, 2.03]"),
    );
    let spec = loggabor::LogGaborFilterSpec::new(0.1, 0.0, 0.55, 0.5).unwrap();
    let (lo, hi) = spec.half_gain_frequencies();
    let numeric = (hi / lo).log2();
    o.check(
        (numeric - octaves).abs() < 1e-12 && (loggabor::radial_component(hi, &spec) - 0.5).abs() < 1e-12,
        format!("sampled half-gain points agree with closed form ({numeric:.4})"),
    );
    o.within(start.elapsed(), Duration::from_secs(1));
    o
}

fn fft_vs_spatial() -> Outcome {
    let start = Instant::now();
    let mut o = Outcome::new();
    let (w, h) = (16, 16);
    let bank = loggabor::build_bank(LogGaborBankParams::default(), w, h).unwrap();
    let picks = [0usize, 7, 14, 21];
    let kernels: Vec<_> = picks.iter().map(|&i| common::spatial_kernel(&bank.filters[i])).collect();
    let mut rng = common::rng(1);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let img = common::random_image(&mut rng, w, h);
        let fast = bank.complex_responses(w, h, &img).unwrap();
        for (&fi, kernel) in picks.iter().zip(&kernels) {
            let slow = common::circular_convolve(&img, kernel, w, h);
            for (a, b) in fast[fi].iter().zip(&slow) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    o.check(worst < 1e-9, format!("max |FFT - spatial| = {worst:.2e} over 10 images x 4 filters"));
    o.within(start.elapsed(), Duration::from_secs(5));
    o
}

fn pca_oracle() -> Outcome {
    let start = Instant::now();
    let mut o = Outcome::new();
    let mut rng = common::rng(4);
    let (mut worst_sine, mut worst_eig) = (0.0f64, 0.0f64);
    let mut monotone = true;
    let mut snapshot_cases = 0;
    for inst in 0..20 {
        let n = rng.random_range(4..=50);
        let d = if inst % 2 == 0 {
            rng.random_range(n + 1..=200)
        } else {
            rng.random_range(2..=n)
        };
        if d > n {
            snapshot_cases += 1;
        }
        let spread: Vec<f64> = (0..d).map(|j| 4.0 * 0.6f64.powi(j as i32) + 0.01).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| spread.iter().map(|s| s * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let k = 6.min(n - 1).min(d);
        let model = subspace::fit(&x, k).unwrap();
        let oracle = common::dense_pca(&x);
        let basis: Vec<Vec<f64>> = (0..model.rank).map(|j| model.basis_column(j)).collect();
        worst_sine = worst_sine.max(common::subspace_sine(&basis, &oracle.vectors[..model.rank]));
        for (a, b) in model.eigenvalues.iter().zip(&oracle.values) {
            worst_eig = worst_eig.max((a - b).abs());
        }
        let full = subspace::fit(&x, usize::MAX).unwrap().rank;
        let mut prev = f64::INFINITY;
        for k in 1..=full {
            let m = subspace::fit(&x, k).unwrap();
            let err: f64 = x
                .iter()
                .map(|row| {
                    let r = m.reconstruct(&m.project(row).unwrap());
                    row.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                })
                .sum();
            monotone &= err <= prev * (1.0 + 1e-9) + 1e-12;
            prev = err;
        }
    }
    o.check(worst_sine < 1e-8, format!("largest principal-angle sine {worst_sine:.2e}"));
    o.check(worst_eig < 1e-8, format!("largest eigenvalue deviation {worst_eig:.2e}"));
    o.check(monotone, "reconstruction error nonincreasing in k on all 20 instances");
    o.notes.push(format!("{snapshot_cases} of 20 instances use the snapshot route"));
    o.within(start.elapsed(), Duration::from_secs(10));
    o
}

fn three_cluster_library(rng: &mut rand_chacha::ChaCha8Rng) -> (ClassLibrary, Vec<(String, Vec<Vec<f64>>)>) {
    let d = 12;
    let data: Vec<(String, Vec<Vec<f64>>)> = (0..3)
        .map(|c| {
            let points = (0..15)
                .map(|_| (0..d).map(|j| if j % 3 == c { 1.0 } else { 0.0 } + 0.1 * rng.random_range(-1.0..1.0)).collect())
                .collect();
            (format!("class{c}"), points)
        })
        .collect();
    (classifier::train_library(&data, 6, FRAC_PI_4).unwrap(), data)
}

fn classifier_properties() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = common::rng(5);
    let (lib, data) = three_cluster_library(&mut rng);
    let mut invariant = true;
    for _ in 0..100 {
        let v: Vec<f64> = (0..lib.pca.rank).map(|_| rng.random_range(-1.0..1.0)).collect();
        let base = lib.nearest_class(&v).map(|(c, _)| c);
        for c in [0.1, 1.0, 10.0] {
            let s: Vec<f64> = v.iter().map(|x| x * c).collect();
            invariant &= lib.nearest_class(&s).map(|(c, _)| c) == base;
        }
    }
    o.check(invariant, "argmin class unchanged under scaling by 0.1, 1, 10 (100 vectors)");
    let mut sym = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..10);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ab = classifier::angle_distance(&a, &b).unwrap();
        sym &= ab == classifier::angle_distance(&b, &a).unwrap() && (0.0..=PI).contains(&ab);
    }
    o.check(sym, "angle distance symmetric and within [0, pi] on 1000 pairs");
    let (mut right, mut total) = (0, 0);
    for (i, (_, points)) in data.iter().enumerate() {
        for p in points {
            total += 1;
            right += usize::from(lib.classify(p).unwrap().class == Some(i));
        }
    }
    o.check(right == total, format!("3-cluster training points {right}/{total}"));
    o
}

struct RunArtifacts {
    model: Vec<u8>,
    results: Vec<u8>,
    annotated: Vec<Vec<u8>>,
    report_text: Vec<u8>,
    report_json: Vec<u8>,
    overall: f64,
    elapsed: Duration,
}

fn end_to_end(root: &Path) -> RunArtifacts {
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let scene = root.join("scene");
    synth::cmd_synth(&cfg, &scene, "two_class_basic").unwrap();
    let model = root.join("model.bin");
    pipeline::cmd_train(&cfg, &scene.join(synth::TRAIN_DIR), &model).unwrap();
    let out = root.join("two_class_basic");
    pipeline::cmd_recognize(&cfg, &model, &scene.join(synth::SEQUENCE_DIR), &out).unwrap();
    let results = out.join(pipeline::RESULTS_FILE);
    let report = pipeline::cmd_evaluate(&[(results.clone(), scene.join(synth::TRUTH_FILE))]).unwrap();
    let (text, json) = pipeline::write_report(&report, &root.join("report.txt")).unwrap();
    let elapsed = start.elapsed();
    let mut frames: Vec<PathBuf> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    frames.sort();
    RunArtifacts {
        model: fs::read(model).unwrap(),
        results: fs::read(results).unwrap(),
        annotated: frames.iter().map(|p| fs::read(p).unwrap()).collect(),
        report_text: fs::read(text).unwrap(),
        report_json: fs::read(json).unwrap(),
        overall: report.overall,
        elapsed,
    }
}

fn end_to_end_recognition(run: &RunArtifacts) -> Outcome {
    let mut o = Outcome::new();
    o.check(run.overall >= 90.0, format!("overall accuracy {:.1}% (need >= 90)", run.overall));
    o.check(run.annotated.len() == 150, format!("{} annotated frames", run.annotated.len()));
    o.within(run.elapsed, Duration::from_secs(60));
    o
}

fn determinism(a: &RunArtifacts, b: &RunArtifacts) -> Outcome {
    let mut o = Outcome::new();
    o.check(a.model == b.model, "model files identical");
    o.check(a.results == b.results, "JSONL identical");
    o.check(a.annotated == b.annotated, "annotated frames identical");
    o.check(a.report_text == b.report_text && a.report_json == b.report_json, "reports identical");
    o
}

fn det(x: f64, y: f64) -> Detection {
    Detection {
        bbox: BoundingBox::new(x as usize, y as usize, 10, 10),
        centroid: (x, y),
        area: 100,
    }
}

fn tracker_assignment() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = common::rng(8);
    let params = TrackerParams::default();
    let (mut valid, mut ids_ok) = (true, true);
    let (mut two_by_two, mut optimal) = (0, 0);
    let mut counterexample = None;
    for inst in 0..200 {
        // the first 50 are 2x2 inside a 25 px square, so every pair passes the gate
        let (r, c, extent) = if inst < 50 {
            (2, 2, 25.0)
        } else {
            (rng.random_range(1..=4), rng.random_range(1..=4), 60.0)
        };
        let tracks: Vec<Track> = (0..r)
            .map(|i| Track::new(i as u64, &det(rng.random_range(0.0..extent), rng.random_range(0.0..extent))))
            .collect();
        let dets: Vec<Detection> = (0..c)
            .map(|_| det(rng.random_range(0.0..extent), rng.random_range(0.0..extent)))
            .collect();
        let costs: Vec<Vec<Option<f64>>> = tracks
            .iter()
            .map(|t| dets.iter().map(|d| tracker::association_cost(t, d, &params)).collect())
            .collect();
        let finite: Vec<f64> = costs.iter().flatten().flatten().copied().collect();
        let distinct: HashSet<u64> = finite.iter().map(|v| v.to_bits()).collect();
        if distinct.len() != finite.len() {
            continue;
        }
        let mut greedy = tracker::greedy_assignment(&costs);
        greedy.sort_unstable();
        let rows: HashSet<_> = greedy.iter().map(|p| p.0).collect();
        let cols: HashSet<_> = greedy.iter().map(|p| p.1).collect();
        valid &= rows.len() == greedy.len()
            && cols.len() == greedy.len()
            && greedy.iter().all(|&(a, b)| costs[a][b].is_some());

        let mut tr = Tracker::with_tracks(params, tracks).unwrap();
        let assoc = tr.associate(&dets);
        let assigned: HashSet<u64> = assoc.track_ids.iter().copied().collect();
        let live: HashSet<u64> = tr.tracks().iter().map(|t| t.id).collect();
        ids_ok &= assigned.len() == dets.len() && live.len() == tr.tracks().len();
        ids_ok &= assoc.track_ids.iter().filter(|&&id| id >= r as u64).count() == dets.len() - greedy.len();

        if (r, c) == (2, 2) && finite.len() == 4 {
            two_by_two += 1;
            let (best, best_cost) = common::brute_force_assignment(&costs);
            let total: f64 = greedy.iter().map(|&(a, b)| costs[a][b].unwrap()).sum();
            if best == greedy {
                optimal += 1;
            } else if counterexample.is_none() {
                counterexample = Some(format!(
                    "e.g. greedy {greedy:?} total {total:.2} vs optimum {best:?} total {best_cost:.2}"
                ));
            }
        }
    }
    o.check(valid, "greedy output is a valid one-to-one matching on all instances");
    o.check(ids_ok, "track ids unique, one per detection, new ids only for unmatched detections");
    o.check(
        optimal == two_by_two,
        format!("greedy equals min-total-cost optimum on {optimal}/{two_by_two} fully ungated 2x2 instances"),
    );
    if let Some(ex) = counterexample {
        o.notes.push(ex);
    }
    o
}

fn report(n: usize, name: &str, o: &Outcome) -> bool {
    println!(
        "criterion {n} {name}: {} ({})",
        if o.pass { "PASS" } else { "FAIL" },
        o.notes.join("; ")
    );
    o.pass
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; nothing to enumerate.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let run_a = end_to_end(dir_a.path());
    let run_b = end_to_end(dir_b.path());
    let results = [
        report(1, "table arithmetic", &table_arithmetic()),
        report(2, "filter invariants", &filter_invariants()),
        report(3, "fft vs spatial oracle", &fft_vs_spatial()),
        report(4, "pca oracle", &pca_oracle()),
        report(5, "classifier properties", &classifier_properties()),
        report(6, "end-to-end synthetic recognition", &end_to_end_recognition(&run_a)),
        report(7, "determinism", &determinism(&run_a, &run_b)),
        report(8, "tracker assignment", &tracker_assignment()),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {}/{} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
