//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails unexpectedly.
//!
//! Run with `cargo test -p orderpipe-cli --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use orderpipe::gateway::{BackendRegistry, ScriptedBackend};
use orderpipe::metrics::{align_orders, provenance_f1, rouge1_f1, AlignOptions, HeadlineMetrics};
use orderpipe::orders::{dedup_key, postprocess_orders, word_count, MedicalOrder, OrderType, PostprocessConfig};
use orderpipe::strategies::{
    extract_agentic, extract_oneshot, extract_react, oneshot_example_output, LlmSettings, PromptCatalog, ReactConfig,
    Stage, StrategyRegistry, ViolationKind,
};
use orderpipe::transcript::{load_dataset, Encounter, LoadMode, Speaker, Split, Transcript, Turn};
use orderpipe_cli::{cmd_evaluate, cmd_extract, cmd_record, Averaging, EvaluateArgs, Prediction, RunArgs, RunConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::json;

enum Verdict {
    Pass(String),
    /// Failed for a reason analysed and recorded up front; does not fail the run.
    KnownFail(String),
}

type Outcome = Result<Verdict, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn worked_example() -> Encounter {
    load_dataset(
        &fixtures_dir().join("worked_example.json"),
        Split::Custom,
        LoadMode::Strict,
    )
    .unwrap()
    .encounters
    .remove(0)
}

// 1 -------------------------------------------------------------------------

/// (prediction, reference, numerator, denominator), computed independently
/// with exact fractions.
const ROUGE_CASES: &[(&str, &str, u64, u64)] = &[
    ("lasix 40 mg daily", "lasix 40 milligrams a day", 4, 9),
    ("lasix 40 milligrams a day", "lasix 40 milligrams a day", 1, 1),
    ("hemoglobin a1c", "hemoglobin a1c", 1, 1),
    ("Hemoglobin A1C", "hemoglobin a1c test", 4, 5),
    ("chest x-ray", "chest xray", 2, 5),
    ("chest x-ray", "x-ray of the chest", 3, 4),
    ("follow up in 3 months", "follow-up in three months", 4, 5),
    ("", "", 1, 1),
    ("", "cbc", 0, 1),
    ("cbc", "", 0, 1),
    ("the the the", "the", 1, 2),
    ("the", "the the the", 1, 2),
    ("mri of the left knee", "left knee mri", 3, 4),
    ("basic metabolic panel", "comprehensive metabolic panel", 2, 3),
    (
        "metformin 500 mg twice a day",
        "metformin 500 milligrams twice daily",
        6,
        11,
    ),
    (
        "ct abdomen and pelvis with contrast",
        "ct of the abdomen and pelvis",
        2,
        3,
    ),
    ("refer to cardiology", "cardiology referral", 2, 5),
    ("Lipid Panel!!!", "lipid, panel", 1, 1),
    ("amoxicillin", "ibuprofen", 0, 1),
    ("a a b b c", "a b c c c", 3, 5),
    ("echo", "echocardiogram", 0, 1),
    ("type i diabetes", "type 1 diabetes", 2, 3),
    (
        "shortness of breath acute heart failure exacerbation",
        "acute heart failure exacerbation",
        8,
        11,
    ),
    ("urine culture and sensitivity", "urine culture", 2, 3),
];

const MULTILABEL_CASES: &[(&[u32], &[u32], u64, u64)] = &[
    (&[126], &[126, 127], 2, 3),
    (&[126, 127], &[126, 127], 1, 1),
    (&[], &[], 1, 1),
    (&[], &[1], 0, 1),
    (&[1], &[], 0, 1),
    (&[1, 2, 3], &[2, 3, 4], 2, 3),
    (&[5], &[6], 0, 1),
    (&[1, 2, 3, 4, 5], &[1], 1, 3),
    (&[10, 20], &[20, 30, 40], 2, 5),
    (&[0], &[0], 1, 1),
    (&[138], &[138], 1, 1),
    (&[126, 127, 138], &[126, 138], 4, 5),
    (&[1, 3, 5, 7], &[2, 4, 6, 8], 0, 1),
    (&[1, 2], &[1, 2, 3, 4, 5, 6], 1, 2),
    (&[7, 8, 9], &[9], 1, 2),
    (&[100], &[100, 101, 102, 103], 2, 5),
    (&[3, 4], &[3, 4], 1, 1),
    (&[2, 4, 6], &[4, 6, 8, 10], 4, 7),
    (&[11, 12, 13, 14], &[12, 13], 2, 3),
    (&[1, 2, 3, 4, 5], &[1, 2, 3, 4, 5], 1, 1),
    (&[42], &[41, 42, 43], 1, 2),
    (&[0, 1], &[1, 2], 1, 2),
];

fn metric_oracles() -> Outcome {
    let started = Instant::now();
    for &(p, r, num, den) in ROUGE_CASES {
        let got = rouge1_f1(p, r);
        let want = num as f64 / den as f64;
        ensure((got - want).abs() <= 1e-12, || {
            format!("rouge1({p:?}, {r:?}) = {got}, want {num}/{den}")
        })?;
    }
    for &(p, g, num, den) in MULTILABEL_CASES {
        let got = provenance_f1(p, g);
        let want = num as f64 / den as f64;
        ensure((got - want).abs() <= 1e-12, || {
            format!("multilabel({p:?}, {g:?}) = {got}, want {num}/{den}")
        })?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))?;
    Ok(Verdict::Pass(format!(
        "{} rouge pairs, {} multilabel pairs in {elapsed:?}",
        ROUGE_CASES.len(),
        MULTILABEL_CASES.len()
    )))
}

// 2 -------------------------------------------------------------------------

// 0.318 is a table value, not 1/pi
#[allow(clippy::approx_constant)]
fn published_averages() -> Outcome {
    let rows = [
        ("4B 1-Shot", [0.516, 0.318, 0.602, 0.307], 0.436),
        ("4B ReAct", [0.363, 0.120, 0.465, 0.160], 0.277),
        ("4B Agentic", [0.09, 0.06, 0.169, 0.123], 0.111),
        ("27B 1-Shot", [0.591, 0.342, 0.703, 0.561], 0.549),
        ("27B ReAct", [0.353, 0.283, 0.497, 0.350], 0.370),
    ];
    let mut misses = Vec::new();
    for (label, [d, r, t, p], published) in rows {
        let mean = HeadlineMetrics::new(d, r, t, p).average();
        // half a unit in the third decimal, plus float slack for exact ties
        if (mean - published).abs() > 0.0005 + 1e-12 {
            misses.push(format!("{label}: mean {mean:.5} vs published {published:.3}"));
        }
    }
    match misses.as_slice() {
        [] => Ok(Verdict::Pass("5/5 rows".into())),
        [only] if only.starts_with("27B ReAct: mean 0.37075") => Ok(Verdict::KnownFail(format!(
            "4/5 rows; {only}. The published components average to 0.37075, which rounds to 0.371; \
             the published 0.370 is off by 0.00075. No averaging of the printed values yields it."
        ))),
        _ => Err(misses.join("; ")),
    }
}

// 3 -------------------------------------------------------------------------

fn worked_example_end_to_end() -> Outcome {
    let e = worked_example();
    let backend = ScriptedBackend::replies([oneshot_example_output()]);
    let res = extract_oneshot(
        &e,
        &backend,
        &LlmSettings::default(),
        &PostprocessConfig::default(),
        &PromptCatalog::builtin(),
    )
    .map_err(|err| err.to_string())?;
    let gold = e.gold_orders.clone().unwrap();
    ensure(res.orders == gold, || format!("extracted {:?}", res.orders))?;

    let dir = tempfile::tempdir().unwrap();
    let pred_path = dir.path().join("pred.json");
    let pred = Prediction {
        encounter_id: res.encounter_id.clone(),
        strategy: res.strategy,
        orders: res.orders.clone(),
        diagnostics: res.diagnostics.summary(),
    };
    std::fs::write(&pred_path, serde_json::to_string(&[pred]).unwrap()).unwrap();
    let report = cmd_evaluate(&EvaluateArgs {
        predictions: pred_path,
        gold: fixtures_dir().join("worked_example.json"),
        split: Split::Custom,
        output: None,
        label: None,
        text_averaging: Averaging::Macro,
        type_averaging: Averaging::Micro,
        any_type: false,
    })
    .map_err(|err| err.to_string())?;
    let m = report.metrics;
    let all = [
        m.description_rouge1_f1,
        m.reason_rouge1_f1,
        m.order_type_strict_f1,
        m.provenance_multilabel_f1,
    ];
    ensure(all == [1.0; 4], || format!("metrics {all:?}"))?;
    Ok(Verdict::Pass("2 orders extracted, all four metrics 1.0".into()))
}

// 4 -------------------------------------------------------------------------

fn react_contract() -> Outcome {
    let e = Encounter {
        id: "react".into(),
        transcript: Transcript::new(vec![
            Turn::new(
                126,
                Speaker::Doctor,
                "i want to put you on some lasix, 40 milligrams a day.",
            ),
            Turn::new(
                127,
                Speaker::Patient,
                "could you also refill my albuterol inhaler for the gym",
            ),
        ])
        .unwrap(),
        gold_orders: None,
    };
    let long = "refill of the albuterol inhaler that i use at the gym before workouts and also whenever the weather turns cold outside";
    assert_eq!(word_count(long), 21);
    let valid = r#"{"order_type": "medication", "description": "lasix 40 milligrams a day", "reason": "", "provenance": [126]}"#;
    let first = format!(
        "Thought: two orders.\nAction: [{{\"order_type\": \"medication\", \"description\": \"{long}\", \"reason\": \"\", \"provenance\": [127]}}, {valid}]"
    );
    let second = format!("Thought: only the doctor's order remains.\nAction: [{valid}]");

    let run = |replies: Vec<String>, max_iterations: usize| {
        let cfg = ReactConfig {
            max_iterations,
            ..Default::default()
        };
        let backend = ScriptedBackend::replies(replies);
        extract_react(&e, &backend, &LlmSettings::default(), &cfg, &PromptCatalog::builtin())
            .map(|r| (r, backend.calls().len()))
            .map_err(|err| err.to_string())
    };

    let (res, calls) = run(vec![first.clone(), second], 3)?;
    let kinds: Vec<ViolationKind> = res.diagnostics.violations[0].iter().map(|v| v.kind).collect();
    ensure(
        kinds.contains(&ViolationKind::NotDoctorInitiated) && kinds.contains(&ViolationKind::TooLong),
        || format!("first iteration violations {kinds:?}"),
    )?;
    ensure(res.diagnostics.iterations == 2 && calls == 2, || {
        format!("iterations {}", res.diagnostics.iterations)
    })?;
    ensure(res.orders.len() == 1 && res.orders[0].provenance == [126], || {
        format!("{:?}", res.orders)
    })?;

    let (res, calls) = run(vec![first], 1)?;
    ensure(calls == 1 && res.diagnostics.exhausted, || {
        "exhaustion not flagged".into()
    })?;
    ensure(
        res.orders.len() == 1 && res.orders[0].description == "lasix 40 milligrams a day",
        || format!("{:?}", res.orders),
    )?;
    Ok(Verdict::Pass(
        "fixed on iteration 2; exhaustion at max_iterations=1 drops the violator".into(),
    ))
}

// 5 -------------------------------------------------------------------------

fn agentic_contract() -> Outcome {
    let e = worked_example();
    let run = |replies: [&str; 4]| {
        let backend = ScriptedBackend::replies(replies);
        extract_agentic(
            &e,
            &backend,
            &LlmSettings::default(),
            &PostprocessConfig::default(),
            &PromptCatalog::builtin(),
        )
        .map(|r| (r, backend.calls().len()))
        .map_err(|err| err.to_string())
    };
    let expected = oneshot_example_output();
    let identifier = "turn 127: ORDER lasix 40 milligrams a day | REASON acute heart failure exacerbation\nturn 138: ORDER hemoglobin a1c | REASON type i diabetes";
    let mapper = "ORDER lasix 40 milligrams a day | TYPE medication | REASON acute heart failure | TURNS 126, 127\nORDER hemoglobin a1c | TYPE lab | REASON type i diabetes | TURNS 138";

    let (res, calls) = run([identifier, mapper, expected, expected])?;
    let stages: Vec<Stage> = res.diagnostics.calls.iter().map(|c| c.stage).collect();
    ensure(calls == 4, || format!("{calls} calls"))?;
    ensure(
        stages == [Stage::Identifier, Stage::Mapper, Stage::Structurer, Stage::Validator],
        || format!("{stages:?}"),
    )?;
    ensure(res.orders.len() == 2 && !res.diagnostics.fallback, || {
        format!("{:?}", res.orders)
    })?;

    let (res, calls) = run([
        identifier,
        mapper,
        expected,
        "All orders verified against the transcript.",
    ])?;
    ensure(calls == 4 && res.diagnostics.fallback && res.orders.len() == 2, || {
        format!("fallback {} with {} orders", res.diagnostics.fallback, res.orders.len())
    })?;
    Ok(Verdict::Pass(
        "4 calls in stage order; prose from the Validator falls back to the Structurer".into(),
    ))
}

// 6 -------------------------------------------------------------------------

const WORDS: &[&str] = &[
    "lasix", "40", "mg", "daily", "chest", "x-ray", "a1c", "Follow", "up", "and", "test", "CBC",
];

fn text(max_words: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(
        (prop::sample::select(WORDS), prop::sample::select(vec![" ", "  ", "\t"])),
        0..max_words,
    )
    .prop_map(|ws| ws.into_iter().map(|(w, sep)| format!("{w}{sep}")).collect())
}

fn order(max_words: usize) -> impl Strategy<Value = MedicalOrder> {
    (
        prop::sample::select(OrderType::ALL.to_vec()),
        text(max_words),
        text(max_words),
        prop::collection::vec(0u32..16, 0..9),
    )
        .prop_map(|(t, d, r, p)| MedicalOrder::new(t, d, r, p))
}

fn postprocess_properties() -> Outcome {
    const CASES: u32 = 10_000;
    let transcript = prop::collection::vec(
        prop::sample::select(vec![Speaker::Doctor, Speaker::Patient, Speaker::Other]),
        1..14,
    )
    .prop_map(|s| {
        Transcript::new(
            s.into_iter()
                .enumerate()
                .map(|(i, s)| Turn::new(i as u32 + i as u32 / 4, s, "x"))
                .collect(),
        )
        .unwrap()
    });
    let cfg = (1usize..25, 1usize..12, 1usize..6, any::<bool>()).prop_map(|(w, o, p, d)| PostprocessConfig {
        max_words: w,
        max_orders: o,
        max_provenance: p,
        require_doctor_provenance: d,
    });
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(
            &(prop::collection::vec(order(30), 0..16), transcript, cfg),
            |(raw, t, cfg)| {
                let (out, _) = postprocess_orders(&raw, &t, &cfg);
                prop_assert!(out.len() <= cfg.max_orders);
                let mut keys = BTreeSet::new();
                for o in &out {
                    prop_assert!(!o.provenance.is_empty() && o.provenance.len() <= cfg.max_provenance);
                    prop_assert!(o.provenance.windows(2).all(|w| w[0] < w[1]));
                    for &turn in &o.provenance {
                        let speaker = t.speaker_of(turn);
                        prop_assert!(speaker.is_some());
                        prop_assert!(!cfg.require_doctor_provenance || speaker == Some(Speaker::Doctor));
                    }
                    prop_assert!((1..=cfg.max_words).contains(&word_count(&o.description)));
                    prop_assert!(word_count(&o.reason) <= cfg.max_words);
                    prop_assert!(keys.insert(dedup_key(o)));
                }
                let sort_key = |o: &MedicalOrder| (o.provenance[0], o.order_type, o.description.clone());
                let sorted = out.windows(2).all(|w| sort_key(&w[0]) <= sort_key(&w[1]));
                prop_assert!(sorted);
                let (again, log) = postprocess_orders(&out, &t, &cfg);
                prop_assert_eq!(&again, &out);
                prop_assert!(log.is_empty());
                Ok(())
            },
        )
        .map_err(|e| e.to_string())?;
    Ok(Verdict::Pass(format!("{CASES} generated order lists")))
}

// 7 -------------------------------------------------------------------------

/// Best assignment by exhaustive search. Among optimal assignments, returns
/// the one whose per-prediction choice vector is smallest, with "unmatched"
/// ranked after every gold index.
fn brute_force(w: &[Vec<f64>], n_gold: usize) -> (f64, Vec<usize>) {
    fn go(
        i: usize,
        w: &[Vec<f64>],
        n_gold: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        out: &mut Vec<(f64, Vec<usize>)>,
        acc: f64,
    ) {
        if i == w.len() {
            out.push((acc, cur.clone()));
            return;
        }
        for j in 0..n_gold {
            if !used[j] && w[i][j] > 0.0 {
                used[j] = true;
                cur.push(j);
                go(i + 1, w, n_gold, used, cur, out, acc + w[i][j]);
                cur.pop();
                used[j] = false;
            }
        }
        cur.push(usize::MAX);
        go(i + 1, w, n_gold, used, cur, out, acc);
        cur.pop();
    }
    let mut all = Vec::new();
    go(0, w, n_gold, &mut vec![false; n_gold], &mut Vec::new(), &mut all, 0.0);
    let best = all.iter().map(|(v, _)| *v).fold(0.0, f64::max);
    let choice = all
        .into_iter()
        .filter(|(v, _)| *v >= best - 1e-9)
        .map(|(_, c)| c)
        .min()
        .unwrap();
    (best, choice)
}

fn alignment_optimality() -> Outcome {
    const TRIALS: u32 = 2_000;
    let mut runner = TestRunner::new(Config {
        cases: TRIALS,
        failure_persistence: None,
        ..Config::default()
    });
    let instance = (
        prop::collection::vec(order(4), 0..=5),
        prop::collection::vec(order(4), 0..=5),
        any::<bool>(),
    );
    runner
        .run(&instance, |(pred, gold, typed)| {
            let opts = AlignOptions {
                require_type_match: typed,
            };
            let a = align_orders(&pred, &gold, opts);
            let weights: Vec<Vec<f64>> = pred
                .iter()
                .map(|p| {
                    gold.iter()
                        .map(|g| {
                            if typed && p.order_type != g.order_type {
                                0.0
                            } else {
                                rouge1_f1(&p.description, &g.description)
                            }
                        })
                        .collect()
                })
                .collect();
            let (best, choice) = brute_force(&weights, gold.len());
            prop_assert!(
                (a.total_weight - best).abs() < 1e-9,
                "weight {} vs brute force {}",
                a.total_weight,
                best
            );
            let mut got = vec![usize::MAX; pred.len()];
            for &(i, j) in &a.pairs {
                got[i] = j;
            }
            prop_assert_eq!(got, choice);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(Verdict::Pass(format!(
        "{TRIALS} random instances up to 5x5 match exhaustive search"
    )))
}

// 8 -------------------------------------------------------------------------

fn replay_determinism() -> Outcome {
    let server = common::serve(common::first_doctor_turn_order);
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    let records = [
        json!({"id": "enc-3", "transcript": "[doctor] we will get a chest x-ray today\n[patient] okay"}),
        json!({"id": "enc-1", "transcript": "[patient] my sugar is high\n[doctor] let's check a hemoglobin a1c\n[doctor] and start metformin"}),
        json!({"id": "enc-2", "transcript": "[doctor] come back in two weeks for a recheck\n[patient] thanks"}),
    ];
    std::fs::write(&input, records.iter().map(|r| format!("{r}\n")).collect::<String>()).unwrap();
    let fixtures = dir.path().join("fixtures");
    let strategies = StrategyRegistry::with_builtins();
    let backends = BackendRegistry::with_builtins();

    let args = |output: &str, backend: &str, concurrency: usize| RunArgs {
        input: Some(input.clone()),
        output: Some(dir.path().join(output)),
        backend: Some(backend.into()),
        base_url: Some(server.base_url.clone()),
        fixtures: Some(fixtures.clone()),
        concurrency: Some(concurrency),
        backoff: Some(0.0),
        ..Default::default()
    };
    let cfg = RunConfig::resolve(&args("recorded.json", "http", 4), "http").map_err(|e| e.to_string())?;
    let recorded = cmd_record(&cfg, &strategies, &backends).map_err(|e| e.to_string())?;
    ensure(recorded.failures.is_empty() && recorded.predictions.len() == 3, || {
        format!("{:?}", recorded.failures)
    })?;
    let live_calls = server.seen.lock().unwrap().len();

    let mut outputs = vec![std::fs::read(dir.path().join("recorded.json")).unwrap()];
    for (name, concurrency) in [("r1.json", 1), ("r4.json", 4), ("r1b.json", 1), ("r4b.json", 4)] {
        let cfg = RunConfig::resolve(&args(name, "replay", concurrency), "http").map_err(|e| e.to_string())?;
        let outcome = cmd_extract(&cfg, &strategies, &backends).map_err(|e| e.to_string())?;
        ensure(outcome.failures.is_empty(), || {
            format!("{name}: {:?}", outcome.failures)
        })?;
        outputs.push(std::fs::read(dir.path().join(name)).unwrap());
    }
    ensure(server.seen.lock().unwrap().len() == live_calls, || {
        "replay reached the server".into()
    })?;
    ensure(outputs.windows(2).all(|w| w[0] == w[1]), || {
        "prediction files differ".into()
    })?;
    let preds: Vec<Prediction> = serde_json::from_slice(&outputs[0]).unwrap();
    let ids: Vec<&str> = preds.iter().map(|p| p.encounter_id.as_str()).collect();
    ensure(ids == ["enc-1", "enc-2", "enc-3"], || format!("{ids:?}"))?;
    Ok(Verdict::Pass(format!(
        "recorded over HTTP, {} replays byte-identical at concurrency 1 and 4",
        outputs.len() - 1
    )))
}

// 9 -------------------------------------------------------------------------

fn dataset_statistics() -> Outcome {
    let (dir, source) = match std::env::var_os("ORDERPIPE_SIMORD_DIR") {
        Some(dir) => (PathBuf::from(dir), "official data"),
        None => (
            fixtures_dir().join("synthetic"),
            "bundled synthetic fixture (official data not available)",
        ),
    };
    let mut parts = Vec::new();
    for split in [Split::Train, Split::Dev] {
        let report = load_dataset(&dir, split, LoadMode::Strict).map_err(|e| e.to_string())?;
        let want = split.reference_stats().unwrap();
        ensure(report.stats == want, || {
            format!("{split:?}: {:?} != {want:?}", report.stats)
        })?;
        parts.push(format!("{} {}/{}", split.as_str(), want.encounters, want.total));
    }
    Ok(Verdict::Pass(format!("{} via {source}", parts.join(", "))))
}

// 10 ------------------------------------------------------------------------

fn non_reproducibility() -> Outcome {
    Ok(Verdict::Pass(
        "absolute model scores are not reproduced; no model is called here, criteria 1-9 cover metrics, pipeline and protocol"
            .into(),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "metric oracles", metric_oracles),
        (2, "published average scores", published_averages),
        (3, "worked example end to end", worked_example_end_to_end),
        (4, "ReAct loop contract", react_contract),
        (5, "agentic contract", agentic_contract),
        (6, "post-processing properties", postprocess_properties),
        (7, "alignment optimality", alignment_optimality),
        (8, "record/replay determinism", replay_determinism),
        (9, "dataset statistics", dataset_statistics),
        (10, "model scores not reproduced", non_reproducibility),
    ];
    // failures are reported on the criterion line instead
    std::panic::set_hook(Box::new(|_| {}));
    let mut unexpected = 0;
    for (n, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(Verdict::Pass(detail)) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Ok(Verdict::KnownFail(detail)) => println!("criterion {n:>2} FAIL  {name}: {detail} [known, not counted]"),
            Err(detail) => {
                unexpected += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
