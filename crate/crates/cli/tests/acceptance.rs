//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use ecnn::cascade::forward;
use ecnn::data_io::{
    normalize, split_odd_even, split_train_test, synth_dataset, SynthParams, Synthetic,
};
use ecnn::domain::FeatureStats;
use ecnn::fitting::{fit_neuron, projection_update, DesignMatrix};
use ecnn::rng::seeded_rng;
use ecnn::{
    error_rate, evolve, multi_run, used_features, CascadeModel, Dataset, InputSource, NeuronSpec,
    Normalization, TrainConfig,
};
use ecnn_cli::ModelFile;
use rand::Rng;

const RELEVANT: [usize; 4] = [10, 23, 36, 60];
const MODERATE_NOISE: f64 = 0.5;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "projection-rule oracle",
            budget: Some(Duration::from_secs(1)),
            check: projection_oracle,
        },
        Criterion {
            name: "criterion monotonicity",
            budget: Some(Duration::from_secs(120)),
            check: criterion_monotonicity,
        },
        Criterion {
            name: "feature recovery",
            budget: Some(Duration::from_secs(600)),
            check: feature_recovery,
        },
        Criterion {
            name: "generalization ordering",
            budget: None,
            check: generalization_ordering,
        },
        Criterion {
            name: "convergence speed",
            budget: None,
            check: convergence_speed,
        },
        Criterion {
            name: "size spread",
            budget: None,
            check: size_spread,
        },
        Criterion {
            name: "determinism",
            budget: None,
            check: determinism,
        },
        Criterion {
            name: "split arithmetic",
            budget: None,
            check: split_arithmetic,
        },
        Criterion {
            name: "model round-trip",
            budget: None,
            check: model_round_trip,
        },
        Criterion {
            name: "runtime sanity",
            budget: Some(Duration::from_secs(60)),
            check: runtime_sanity,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut outcome = (c.check)();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(budget)) = (&outcome, c.budget) {
            if elapsed > budget {
                outcome = Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("[PASS] {:<26} {detail} ({elapsed:.2?})", c.name),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:<26} {detail} ({elapsed:.2?})", c.name);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn projection_oracle() -> Outcome {
    let mut rng = seeded_rng(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        // p = 2 inputs plus bias, n_A = 3 examples; u[i][k] is input k of example i.
        let mut u = [[1.0f64; 3]; 3];
        for row in &mut u {
            row[1] = rng.random_range(-5.0..5.0);
            row[2] = rng.random_range(-5.0..5.0);
        }
        let w: [f64; 3] = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        ];
        let eta: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let chi = rng.random_range(0.1..2.0);

        let mut norm_sq = 0.0;
        for row in &u {
            for v in row {
                norm_sq += v * v;
            }
        }
        let mut expected = [0.0; 3];
        for k in 0..3 {
            let mut dot = 0.0;
            for i in 0..3 {
                dot += u[i][k] * eta[i];
            }
            expected[k] = w[k] - chi / norm_sq * dot;
        }

        let design = DesignMatrix::new(3, u.iter().flatten().copied().collect())
            .map_err(|e| e.to_string())?;
        let got = projection_update(&w, &design, &eta, chi).map_err(|e| e.to_string())?;
        for k in 0..3 {
            worst = worst.max((got[k] - expected[k]).abs());
        }
    }
    if worst <= 1e-12 {
        Ok(format!(
            "100 instances, max |diff| = {worst:.1e} (tol 1e-12)"
        ))
    } else {
        Err(format!("max |diff| = {worst:.3e} exceeds 1e-12"))
    }
}

fn criterion_monotonicity() -> Outcome {
    let mut violations = 0;
    let mut accepted_total = 0;
    for seed in 0..50u64 {
        let d = synth_dataset(&SynthParams::new(
            1000,
            20,
            vec![3, 7, 11, 15],
            MODERATE_NOISE,
            500 + seed,
        ))
        .map_err(|e| e.to_string())?
        .data;
        let split = split_odd_even(&normalize(&d).0).map_err(|e| e.to_string())?;
        let (model, trace) = evolve(&split, &TrainConfig::default(), &mut seeded_rng(seed))
            .map_err(|e| e.to_string())?;
        let mut seq = vec![trace.ranked_features[0].score];
        seq.extend(trace.accepted.iter().map(|a| a.criterion));
        accepted_total += trace.accepted.len();
        violations += seq.windows(2).filter(|w| w[1] >= w[0]).count();
        violations += model
            .criterion_history()
            .windows(2)
            .filter(|w| w[1] >= w[0])
            .count();
        if !trace.degenerate && model.criterion_history() != seq.as_slice() {
            violations += 1;
        }
    }
    if violations == 0 {
        Ok(format!(
            "50 runs, {accepted_total} accepted neurons, 0 violations"
        ))
    } else {
        Err(format!("{violations} violations of strict decrease"))
    }
}

struct Repetition {
    relevant_used: usize,
    feature_count: usize,
    best_test: f64,
    anchor_test: f64,
}

fn recovery_repetitions() -> &'static [Repetition] {
    static CACHE: std::sync::OnceLock<Vec<Repetition>> = std::sync::OnceLock::new();
    CACHE.get_or_init(|| {
        (0..20u64)
            .map(|rep| {
                let Synthetic { data, .. } = synth_dataset(&SynthParams::new(
                    2000,
                    72,
                    RELEVANT.to_vec(),
                    MODERATE_NOISE,
                    9000 + rep,
                ))
                .unwrap();
                let tt = split_train_test(&data, 0.35, &mut seeded_rng(rep)).unwrap();
                let config = TrainConfig {
                    seed: 7000 + rep,
                    ..TrainConfig::default()
                };
                let out = multi_run(&tt.train, Some(&tt.test), &config, 10).unwrap();
                let used = used_features(&out.best);
                let anchor = out
                    .best_trace
                    .anchor_model(out.best.normalization().clone())
                    .unwrap();
                Repetition {
                    relevant_used: used.iter().filter(|j| RELEVANT.contains(j)).count(),
                    feature_count: used.len(),
                    best_test: out.summaries[out.best_run].test_error_pct.unwrap(),
                    anchor_test: error_rate(&anchor, &tt.test, 0.5).unwrap(),
                }
            })
            .collect()
    })
}

fn feature_recovery() -> Outcome {
    let reps = recovery_repetitions();
    let hits = reps.iter().filter(|r| r.relevant_used >= 2).count();
    let mut counts: Vec<usize> = reps.iter().map(|r| r.feature_count).collect();
    counts.sort_unstable();
    let median = (counts[9] + counts[10]) as f64 / 2.0;
    let detail = format!("{hits}/20 bests use >= 2 relevant features (need 16), median feature count {median} (need <= 10)");
    if hits >= 16 && median <= 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn generalization_ordering() -> Outcome {
    let reps = recovery_repetitions();
    let wins = reps.iter().filter(|r| r.best_test < r.anchor_test).count();
    let mean = |f: fn(&Repetition) -> f64| reps.iter().map(f).sum::<f64>() / reps.len() as f64;
    let detail = format!(
        "{wins}/20 beat the anchor neuron on test (need 16); mean test error {:.2}% vs {:.2}%",
        mean(|r| r.best_test),
        mean(|r| r.anchor_test)
    );
    if wins >= 16 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn convergence_speed() -> Outcome {
    let config = TrainConfig::default();
    let mut steps = Vec::with_capacity(200);
    let mut capped = 0;
    for set in 0..4u64 {
        let d = synth_dataset(&SynthParams::new(
            2244,
            72,
            RELEVANT.to_vec(),
            MODERATE_NOISE,
            40 + set,
        ))
        .map_err(|e| e.to_string())?
        .data;
        let split = split_odd_even(&normalize(&d).0).map_err(|e| e.to_string())?;
        let mut pick = seeded_rng(set);
        for k in 0..50u64 {
            let a = pick.random_range(0..72);
            let b = (a + pick.random_range(1..72)) % 72;
            let wiring = if k % 2 == 0 {
                vec![InputSource::Feature(a)]
            } else {
                vec![InputSource::Feature(a), InputSource::Feature(b)]
            };
            let fit = fit_neuron(
                &split,
                &wiring,
                &[],
                &[],
                &config,
                &mut seeded_rng(set * 100 + k),
            )
            .map_err(|e| e.to_string())?;
            capped += usize::from(fit.steps_taken == config.max_fit_steps);
            steps.push(fit.steps_taken);
        }
    }
    steps.sort_unstable();
    let median = (steps[99] + steps[100]) as f64 / 2.0;
    let detail = format!("median steps {median} over 200 fits (need <= 30), {capped} hit the cap");
    if median <= 30.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn size_spread() -> Outcome {
    let d = synth_dataset(&SynthParams::new(
        2244,
        72,
        RELEVANT.to_vec(),
        MODERATE_NOISE,
        77,
    ))
    .map_err(|e| e.to_string())?
    .data;
    let config = TrainConfig {
        seed: 1,
        ..TrainConfig::default()
    };
    let out = multi_run(&d, None, &config, 100).map_err(|e| e.to_string())?;
    let sizes: std::collections::BTreeSet<usize> =
        out.summaries.iter().map(|s| s.model_size).collect();
    let in_range = sizes.iter().all(|&s| (1..=config.max_layers).contains(&s));
    let detail = format!(
        "{} distinct sizes {:?} (need >= 3, within [1, {}])",
        sizes.len(),
        sizes,
        config.max_layers
    );
    if sizes.len() >= 3 && in_range {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cli(args: &[&str]) -> Result<(Vec<u8>, Vec<u8>), String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = ecnn_cli::run(
        std::iter::once("ecnn").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    if code != 0 {
        return Err(format!(
            "`{}` exited {code}: {}",
            args.join(" "),
            String::from_utf8_lossy(&err)
        ));
    }
    Ok((out, err))
}

/// Runs the whole command pipeline in `dir` and returns every byte it produced.
fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let path = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let (data, model, preds, report) = (
        path("d.csv"),
        path("m.ecnn"),
        path("pred.csv"),
        path("report.txt"),
    );
    let mut captured = Vec::new();
    let mut step = |label: &str, args: &[&str]| -> Result<(), String> {
        let (o, e) = cli(args)?;
        captured.push((format!("{label} stdout"), o));
        captured.push((format!("{label} stderr"), e));
        Ok(())
    };
    step(
        "synth",
        &[
            "synth",
            "--n",
            "1200",
            "--m",
            "30",
            "--relevant",
            "2,9,17",
            "--seed",
            "5",
            "--out",
            &data,
        ],
    )?;
    step(
        "train",
        &[
            "train",
            "--data",
            &data,
            "--label",
            "y",
            "--runs",
            "100",
            "--seed",
            "42",
            "--test-fraction",
            "0.35",
            "--out",
            &model,
        ],
    )?;
    step(
        "predict",
        &[
            "predict", "--model", &model, "--data", &data, "--label", "y", "--out", &preds,
        ],
    )?;
    step(
        "eval",
        &["eval", "--model", &model, "--data", &data, "--label", "y"],
    )?;
    let summary = format!("{model}.runs.csv");
    step(
        "report",
        &[
            "report",
            "--summary",
            &summary,
            "--bin",
            "0.5",
            "--out",
            &report,
        ],
    )?;
    for file in [
        data.clone(),
        format!("{data}.truth.json"),
        model.clone(),
        summary,
        preds,
        report,
    ] {
        let bytes = std::fs::read(&file).map_err(|e| format!("{file}: {e}"))?;
        captured.push((file, bytes));
    }
    Ok(captured)
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let first = pipeline(dir.path())?;
    let second = pipeline(dir.path())?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0.as_str())
        .collect();
    if differing.is_empty() {
        let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
        Ok(format!("synth/train(100 runs)/predict/eval/report repeated: {} outputs, {bytes} bytes identical", first.len()))
    } else {
        Err(format!("outputs differ: {differing:?}"))
    }
}

fn split_arithmetic() -> Outcome {
    let d = Dataset::from_rows(
        (0..2244).map(|i| vec![i as f64, 0.0]).collect(),
        vec![0.0; 2244],
    )
    .map_err(|e| e.to_string())?;
    let s = split_odd_even(&d).map_err(|e| e.to_string())?;
    let (a, b) = (s.set_a().n_examples(), s.set_b().n_examples());
    if (a, b) == (1122, 1122) {
        Ok(format!("n = 2244 -> {a}/{b}"))
    } else {
        Err(format!("n = 2244 -> {a}/{b}, expected 1122/1122"))
    }
}

fn random_model<R: Rng>(rng: &mut R) -> CascadeModel {
    let m = rng.random_range(2..80);
    let anchor = rng.random_range(0..m);
    let stats: Vec<FeatureStats> = (0..m)
        .map(|_| FeatureStats {
            mean: rng.random_range(-100.0..100.0),
            std: if rng.random_bool(0.05) {
                0.0
            } else {
                rng.random_range(1e-3..50.0)
            },
        })
        .collect();
    let norm = Normalization::new(stats).unwrap();
    let weight = |rng: &mut R| {
        let mag = 10f64.powf(rng.random_range(-8.0..2.0));
        if rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    if rng.random_bool(0.1) {
        let neuron = NeuronSpec {
            layer: 1,
            inputs: vec![InputSource::Feature(anchor)],
            weights: vec![weight(rng), weight(rng)],
        };
        return CascadeModel::new(
            vec![neuron],
            anchor,
            vec![rng.random_range(0.0..40.0)],
            norm,
        )
        .unwrap();
    }
    let layers = rng.random_range(1..=12);
    let neurons = (1..=layers)
        .map(|r| {
            let cand = (anchor + rng.random_range(1..m)) % m;
            let mut inputs: Vec<InputSource> = (1..r).rev().map(InputSource::Neuron).collect();
            inputs.push(InputSource::Feature(anchor));
            inputs.push(InputSource::Feature(cand));
            let weights = (0..=inputs.len()).map(|_| weight(rng)).collect();
            NeuronSpec {
                layer: r,
                inputs,
                weights,
            }
        })
        .collect();
    let mut c = rng.random_range(10.0..40.0);
    let history = (0..=layers)
        .map(|_| {
            let v = c;
            c -= rng.random_range(1e-9..0.5);
            v
        })
        .collect();
    CascadeModel::new(neurons, anchor, history, norm).unwrap()
}

fn model_round_trip() -> Outcome {
    let mut rng = seeded_rng(31337);
    let mut mismatches = 0;
    let mut rewrites = 0;
    for _ in 0..1000 {
        let model = random_model(&mut rng);
        let file = ModelFile::new(model, TrainConfig::default(), None);
        let text = file.to_text();
        let loaded = ModelFile::from_text(&text).map_err(|e| e.to_string())?;
        if loaded.to_text() != text {
            rewrites += 1;
        }
        for _ in 0..100 {
            let x: Vec<f64> = (0..file.model.n_features())
                .map(|_| rng.random_range(-200.0..200.0))
                .collect();
            let a = forward(&file.model, &x).map_err(|e| e.to_string())?.output;
            let b = forward(&loaded.model, &x)
                .map_err(|e| e.to_string())?
                .output;
            if a.to_bits() != b.to_bits() {
                mismatches += 1;
            }
        }
    }
    if mismatches == 0 && rewrites == 0 {
        Ok("1000 models x 100 examples bit-identical; re-save byte-identical".into())
    } else {
        Err(format!(
            "{mismatches} output mismatches, {rewrites} files changed on re-save"
        ))
    }
}

fn runtime_sanity() -> Outcome {
    let d = synth_dataset(&SynthParams::new(
        2244,
        72,
        RELEVANT.to_vec(),
        MODERATE_NOISE,
        123,
    ))
    .map_err(|e| e.to_string())?
    .data;
    let start = Instant::now();
    let split = split_odd_even(&normalize(&d).0).map_err(|e| e.to_string())?;
    let (model, trace) =
        evolve(&split, &TrainConfig::default(), &mut seeded_rng(0)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    Ok(format!(
        "n = 2244, m = 72: {} neurons, {} candidates fitted in {elapsed:.2?} (target < 60 s)",
        model.len(),
        trace.accepted.len() + trace.rejected.len()
    ))
}
