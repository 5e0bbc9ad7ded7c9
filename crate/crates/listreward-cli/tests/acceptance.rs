//! Acceptance suite: one test per release criterion, each printing a
//! single pass line on success (run with `--nocapture` to see them).
//!
//! These are the end-to-end guarantees the toolkit ships with: oracle
//! equivalence for the ranking rewards, length-penalty and composition
//! laws, format-reward mutations, metric identities, judge-mock
//! equivalence, multi-valid re-evaluation fidelity, rejection-sampling
//! budgets, dataset round-trips, throughput, and byte determinism.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use listreward_cli::eval::{cmd_eval, EvalOptions};
use listreward_cli::reval::{cmd_reval_multi, RevalOptions};
use listreward_cli::service::{
    router, score_batch_request, ScoreBatchRequest, ScoreBatchResponse, ScorePair, ServiceState,
};
use listreward_core::batch::{score_batch_sequential, BatchItem};
use listreward_core::data::{
    load_records, rejection_validate, save_records, AnswerFormat, QuestionRecord,
};
use listreward_core::judge::{derived_llm_acc, ExactMatchJudge, JudgeVerdict, RankJudge};
use listreward_core::metric::{
    accuracy, accuracy_llm, attach_judge, list_stats, mrr, mrr_llm, EvalRecord,
};
use listreward_core::parse::{extract_think_structure, RawResponse};
use listreward_core::reward::{
    compose, length_penalty, reward_format, reward_list, reward_mrr, reward_qa, RewardConfig,
    RewardKind, RewardOutcome,
};

fn pass(line: &str) {
    println!("acceptance {line}: pass");
}

fn list_record(id: &str, gold: &str, valid: Option<Vec<String>>) -> QuestionRecord {
    QuestionRecord {
        id: id.into(),
        benchmark: "medqa".into(),
        question: format!("question {id}"),
        options: None,
        gold: gold.into(),
        valid_answers: valid,
        format: AnswerFormat::List,
        conversion: None,
    }
}

// --- 1. ranking-reward oracle equivalence -------------------------------

#[test]
fn criterion_01_ranking_rewards_match_linear_scan_oracle() {
    // Six symbols, none a substring of another, so substring matching and
    // exact matching coincide and the oracle is a plain scan.
    const ALPHABET: [&str; 6] = ["apple", "banana", "cherry", "damson", "elderberry", "fig"];
    let started = Instant::now();

    let mut cases = 0usize;
    for len in 0..=5usize {
        let count = 6usize.pow(len as u32);
        for mut code in 0..count {
            let mut items: Vec<String> = Vec::with_capacity(len);
            for _ in 0..len {
                items.push(ALPHABET[code % 6].to_string());
                code /= 6;
            }
            for gold in ALPHABET {
                let oracle = items
                    .iter()
                    .position(|item| item == gold)
                    .map(|idx| (1.0 / (idx + 1) as f64, Some(idx as u32 + 1)))
                    .unwrap_or((0.0, None));
                let got = reward_mrr(&items, gold);
                assert_eq!(got, oracle, "items={items:?} gold={gold}");
                assert_eq!(
                    reward_list(&items, gold),
                    u8::from(got.0 > 0.0),
                    "items={items:?} gold={gold}"
                );
                cases += 1;
            }
        }
    }
    assert!(cases <= 100_000, "case budget exceeded: {cases}");
    assert_eq!(cases, 9_331 * 6);
    assert!(
        started.elapsed() < Duration::from_secs(10),
        "took {:?}",
        started.elapsed()
    );
    pass("01 ranking-reward oracle equivalence");
}

// --- 2. length-penalty laws ---------------------------------------------

#[test]
fn criterion_02_length_penalty_laws() {
    for numerator in [1i64, 3, 5, 7, 9] {
        let lambda_exact = Rational64::new(numerator, 10);
        let lambda = numerator as f64 / 10.0;

        assert_eq!(length_penalty(1, lambda), 1.0);
        assert_eq!(length_penalty(0, lambda), 1.0, "L = 0 behaves like L = 1");

        let mut previous = f64::INFINITY;
        for len in 0u32..=50 {
            let got = length_penalty(len, lambda);
            let effective = i64::from(len.max(1));
            let exact = (Rational64::from_integer(1)
                - lambda_exact * Rational64::from_integer(effective - 1))
            .max(Rational64::zero());

            if exact.is_integer() {
                // 0 and 1 are exactly representable; demand equality there.
                assert_eq!(got, exact.to_f64().unwrap(), "lambda={lambda} len={len}");
            } else {
                assert!(
                    (got - exact.to_f64().unwrap()).abs() < 1e-12,
                    "lambda={lambda} len={len} got={got} exact={exact}"
                );
            }

            assert!(got <= previous, "not nonincreasing at lambda={lambda} len={len}");
            previous = got;

            // Zero exactly when L >= 1 + 1/lambda.
            let beyond_cutoff = Rational64::from_integer(effective)
                >= Rational64::from_integer(1) + lambda_exact.recip();
            assert_eq!(got == 0.0, beyond_cutoff, "lambda={lambda} len={len}");
        }
    }
    pass("02 length-penalty laws");
}

// --- 3. composition bounds and monotonicity -----------------------------

#[test]
fn criterion_03_composition_bounds_and_monotonicity() {
    let mut rng = StdRng::seed_from_u64(0x5eed_c0de);
    for _ in 0..100_000 {
        let c: f64 = rng.gen_range(0.0..=1.0);
        let p: f64 = rng.gen_range(0.0..=1.0);
        let f: u8 = rng.gen_range(0..=1);
        let penalty = rng.gen_bool(0.9).then_some(p);
        let format = rng.gen_bool(0.9).then_some(f);
        let total = compose(c, penalty, format);
        assert!(
            (0.0..=1.0).contains(&total),
            "compose({c}, {penalty:?}, {format:?}) = {total}"
        );
    }

    let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
    for f in [0u8, 1] {
        for &p in &grid {
            for window in grid.windows(2) {
                let (lo, hi) = (window[0], window[1]);
                assert!(compose(lo, Some(p), Some(f)) <= compose(hi, Some(p), Some(f)));
                assert!(compose(p, Some(lo), Some(f)) <= compose(p, Some(hi), Some(f)));
            }
        }
    }
    for &c in &grid {
        for &p in &grid {
            assert!(compose(c, Some(p), Some(0)) <= compose(c, Some(p), Some(1)));
        }
    }
    pass("03 composition bounds and monotonicity");
}

// --- 4. format-reward mutation suite ------------------------------------

#[test]
fn criterion_04_format_reward_mutations() {
    let malformed: [&str; 20] = [
        "no tags at all \\boxed{x}",
        "<think>open only, never closed. answer",
        "close only</think> answer",
        "</think>swapped<think> order",
        "<think>a</think>b<think>c</think>d",
        "leading text <think>r</think>a",
        "<think><think>nested</think></think>",
        "<think><think>double open</think>",
        "<think>double close</think></think>",
        "answer first, then <think>r</think>",
        "<THINK>uppercase</THINK> answer",
        "< think>spaced open</think> answer",
        "<think>spaced close</ think> answer",
        "<think/>self-closing</think>",
        "a<think></think>",
        "<think>unclosed <think>again",
        "</think></think>only closers",
        "x </think> y <think> z",
        "<think>one</think><think>two</think>",
        "pre\n<think>r</think>\nanswer",
    ];
    for text in malformed {
        let structure = extract_think_structure(&RawResponse::new(text));
        assert_eq!(reward_format(&structure), 0, "expected malformed: {text:?}");
    }

    let well_formed: [&str; 5] = [
        "<think>reasoning</think>answer",
        "   <think>leading spaces</think>answer",
        "\n\t<think>leading newline and tab</think>answer",
        "<think></think>empty think, answer follows",
        "<think>reasoning, empty body</think>",
    ];
    for text in well_formed {
        let structure = extract_think_structure(&RawResponse::new(text));
        assert_eq!(reward_format(&structure), 1, "expected well-formed: {text:?}");
    }
    pass("04 format-reward mutation suite");
}

// --- 5. metric identities ------------------------------------------------

fn eval_row(id: usize, items: &[String], gold: &str) -> EvalRecord {
    let (correctness, rank) = reward_mrr(items, gold);
    EvalRecord {
        record_id: format!("r{id}"),
        benchmark: "b".into(),
        answer_format: AnswerFormat::List,
        outcome: RewardOutcome {
            correctness,
            format: None,
            total: correctness,
            rank,
            list_length: Some(items.len() as u32),
            penalty: None,
        },
        judge_rank: None,
        judge_seen: false,
        response_tokens: None,
        list_items: Some(items.to_vec()),
    }
}

#[test]
fn criterion_05_metric_identities() {
    const VOCAB: [&str; 8] = [
        "aspirin", "heparin", "warfarin", "insulin", "statin", "digoxin", "lisinopril", "metformin",
    ];
    let mut rng = StdRng::seed_from_u64(0xacc);

    for set in 0..200 {
        let n = rng.gen_range(3..=30);
        let gold = VOCAB[rng.gen_range(0..VOCAB.len())];
        let rows: Vec<EvalRecord> = (0..n)
            .map(|i| {
                let len = rng.gen_range(0..=6);
                let items: Vec<String> = (0..len)
                    .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_string())
                    .collect();
                eval_row(i, &items, gold)
            })
            .collect();

        // Per-record 1/r <= 1 and IEEE addition is monotone, so the
        // aggregate ordering is exact, not approximate.
        assert!(mrr(&rows).unwrap() <= accuracy(&rows).unwrap(), "set {set}");

        let stats = list_stats(&rows).unwrap();
        let lengths_sum: usize = rows
            .iter()
            .map(|r| r.list_items.as_ref().unwrap().len())
            .sum();
        let nonempty = rows
            .iter()
            .filter(|r| !r.list_items.as_ref().unwrap().is_empty())
            .count();
        let ll_total = stats.ll * n as f64;
        assert!((ll_total - lengths_sum as f64).abs() < 1e-9, "set {set}");
        match stats.vll {
            Some(vll) => {
                let vll_total = vll * nonempty as f64;
                assert!((ll_total - vll_total).abs() < 1e-9, "set {set}");
            }
            None => assert_eq!(nonempty, 0, "set {set}"),
        }
    }

    // A one-item list scores exactly like the bare QA answer.
    let mut rng = StdRng::seed_from_u64(0x51e);
    for _ in 0..1_000 {
        let answer = VOCAB[rng.gen_range(0..VOCAB.len())];
        let gold = VOCAB[rng.gen_range(0..VOCAB.len())];
        assert_eq!(
            reward_list(&[answer.to_string()], gold),
            reward_qa(answer, gold)
        );
    }
    pass("05 metric identities");
}

// --- 6. judge mock equivalence ------------------------------------------

#[test]
fn criterion_06_judge_mock_matches_exact_match_metrics() {
    const VOCAB: [&str; 10] = [
        "amiodarone",
        "bisoprolol",
        "captopril",
        "diltiazem",
        "enalapril",
        "furosemide",
        "gliclazide",
        "hydralazine",
        "ibuprofen",
        "ketamine",
    ];
    let gold = "verapamil"; // never a substring of any vocab word
    let mut rng = StdRng::seed_from_u64(0x1d6e);

    let mut rows: Vec<EvalRecord> = (0..500)
        .map(|i| {
            let len = rng.gen_range(0..=5);
            let mut items: Vec<String> = (0..len)
                .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_string())
                .collect();
            if !items.is_empty() && rng.gen_bool(0.6) {
                let slot = rng.gen_range(0..items.len());
                items[slot] = gold.to_string();
            }
            eval_row(i, &items, gold)
        })
        .collect();

    let judge = ExactMatchJudge;
    let verdicts: Vec<Option<u32>> = rows
        .iter()
        .map(|row| {
            let items = row.list_items.as_ref().unwrap();
            if items.is_empty() {
                None
            } else {
                judge.rank_items("q", gold, items).unwrap()
            }
        })
        .collect();
    attach_judge(&mut rows, &verdicts).unwrap();

    assert_eq!(accuracy_llm(&rows).unwrap(), accuracy(&rows).unwrap());
    assert_eq!(mrr_llm(&rows).unwrap(), mrr(&rows).unwrap());

    for rank in [None, Some(1), Some(2), Some(7)] {
        let verdict = JudgeVerdict {
            rank,
            equivalent: rank.is_some(),
            raw_reply: String::new(),
            parse_ok: true,
        };
        assert_eq!(derived_llm_acc(&verdict), u8::from(rank.is_some()));
    }
    pass("06 judge mock equivalence");
}

// --- 7. multi-valid re-evaluation fidelity ------------------------------

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) {
    let mut file = std::fs::File::create(path).unwrap();
    for row in rows {
        serde_json::to_writer(&mut file, row).unwrap();
        file.write_all(b"\n").unwrap();
    }
}

#[test]
fn criterion_07_multi_valid_reval_recovers_planted_tallies() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    // Planted layout over 1,149 records:
    //   133 correct with the whole valid set recovered,
    //   100 correct only by loose match (exact recovery fails),
    //    43 incorrect flipped valid by an alternative answer (2 valids each),
    //    12 still incorrect with 2 valids, 861 still incorrect with 1.
    let mut records = Vec::new();
    let mut responses = Vec::new();
    for i in 0..1_149usize {
        let id = format!("rec{i:04}");
        let gold = format!("gold{i:04}");
        let (valid, items): (Vec<String>, Vec<String>) = if i < 133 {
            (vec![gold.clone()], vec![gold.clone(), format!("filler{i}")])
        } else if i < 233 {
            (
                vec![gold.clone()],
                vec![format!("{gold} extended"), format!("filler{i}")],
            )
        } else if i < 276 {
            // Misses the gold but hits the expert-approved alternative.
            (
                vec![gold.clone(), format!("alt{i:04}")],
                vec![format!("alt{i:04}"), format!("filler{i}")],
            )
        } else if i < 288 {
            (
                vec![gold.clone(), format!("second{i:04}")],
                vec![format!("filler{i}")],
            )
        } else {
            (vec![gold.clone()], vec![format!("wrong{i:04}")])
        };
        records.push(list_record(&id, &gold, Some(valid)));
        let text = items
            .iter()
            .enumerate()
            .map(|(rank, item)| format!("{}. {item}", rank + 1))
            .collect::<Vec<_>>()
            .join("\n");
        responses.push(serde_json::json!({ "record_id": id, "text": text }));
    }

    let dataset = dir.path().join("dataset.jsonl");
    save_records(&dataset, &records).unwrap();
    write_jsonl(&dir.path().join("responses.jsonl"), &responses);

    let run = cmd_reval_multi(&RevalOptions {
        dataset,
        responses: dir.path().join("responses.jsonl"),
        out_dir: dir.path().join("out"),
    })
    .unwrap();

    assert_eq!(run.tallies.n, 1_149);
    assert_eq!(run.tallies.correct_kept, 233);
    assert_eq!(run.tallies.incorrect_to_valid, 43);
    assert_eq!(run.tallies.still_incorrect, 873);
    assert_eq!(run.tallies.all_valid_covered, 133);
    assert_eq!(run.tallies.partial, 100 + 43);
    assert_eq!(run.tallies.multi_valid_records, 55);
    assert!(
        started.elapsed() < Duration::from_secs(5),
        "took {:?}",
        started.elapsed()
    );
    pass("07 multi-valid re-evaluation fidelity");
}

// --- 8. rejection-sampling budget ---------------------------------------

#[test]
fn criterion_08_rejection_budget_exact() {
    for succeed_on in 1u32..=21 {
        let calls = std::cell::Cell::new(0u32);
        let outcome = rejection_validate::<std::convert::Infallible>(
            "candidate 1".into(),
            20,
            |_| {
                calls.set(calls.get() + 1);
                Ok(calls.get() == succeed_on)
            },
            || Ok(format!("candidate {}", calls.get() + 1)),
        )
        .unwrap();
        if succeed_on <= 20 {
            assert!(outcome.accepted, "succeed_on={succeed_on}");
            assert_eq!(outcome.attempts_used, succeed_on);
        } else {
            assert!(!outcome.accepted);
            assert_eq!(outcome.attempts_used, 20);
        }
    }
    pass("08 rejection-sampling budget");
}

// --- 9. dataset round-trip ----------------------------------------------

#[test]
fn criterion_09_dataset_round_trip_1273_records() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<QuestionRecord> = (0..1_273usize)
        .map(|i| {
            let options: BTreeMap<char, String> = [
                ('A', format!("option a{i}")),
                ('B', format!("option b{i}")),
                ('C', format!("option c{i}")),
                ('D', format!("option d{i}")),
            ]
            .into_iter()
            .collect();
            QuestionRecord {
                id: format!("medqa-{i:04}"),
                benchmark: "medqa".into(),
                question: format!("A patient presents with condition {i}. Which treatment?"),
                options: Some(options),
                gold: "B".into(),
                valid_answers: None,
                format: AnswerFormat::Mcq,
                conversion: None,
            }
        })
        .collect();

    let first = dir.path().join("first.jsonl");
    save_records(&first, &records).unwrap();
    let loaded = load_records(&first, Some(AnswerFormat::Mcq)).unwrap();
    assert_eq!(loaded.len(), 1_273);
    assert_eq!(loaded, records);

    let second = dir.path().join("second.jsonl");
    save_records(&second, &loaded).unwrap();
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
    pass("09 dataset round-trip");
}

// --- 10. throughput ------------------------------------------------------

fn synthetic_list_response(i: usize) -> String {
    // ~1 KB: a reasoning block plus a five-item ranked list.
    let filler = "the differential remains broad and the presentation is nonspecific "
        .repeat(12);
    format!(
        "<think>case {i}: {filler}</think>\n\
         1. candidate alpha {i}\n2. candidate beta {i}\n3. target answer\n\
         4. candidate delta {i}\n5. candidate epsilon {i}\n"
    )
}

#[test]
fn criterion_10_throughput_and_service_overhead() {
    let config = RewardConfig {
        kind: RewardKind::ListMrr,
        use_format_reward: true,
        lambda: None,
    };

    let record = list_record("throughput", "target answer", None);
    let raws: Vec<RawResponse> = (0..100_000)
        .map(|i| RawResponse::new(synthetic_list_response(i)))
        .collect();
    assert!(raws[0].text.len() >= 900, "responses should be ~1 KB");
    let pairs: Vec<BatchItem<'_>> = raws.iter().map(|raw| (raw, &record)).collect();

    let started = Instant::now();
    let results = score_batch_sequential(&pairs, &config, None);
    let elapsed = started.elapsed();
    assert!(results.iter().all(|r| r.is_ok()));
    assert_eq!(results.len(), 100_000);
    assert!(
        elapsed < Duration::from_secs(10),
        "sequential scoring of 100k took {elapsed:?}"
    );

    // Service round-trip on a 1,000-item batch must stay under 2x the
    // in-process scoring time.
    let request = ScoreBatchRequest {
        v: 1,
        config,
        pairs: (0..1_000)
            .map(|i| ScorePair {
                response_text: synthetic_list_response(i),
                record_id: None,
                gold: Some("target answer".into()),
                format: Some(AnswerFormat::List),
                question: None,
            })
            .collect(),
    };
    let state = Arc::new(ServiceState {
        dataset: None,
        judge: None,
    });

    let (tx, rx) = std::sync::mpsc::channel();
    let server_state = state.clone();
    std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router(server_state)).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    let client = reqwest::blocking::Client::new();

    let in_process = || {
        let t = Instant::now();
        let response = score_batch_request(&state, &request).unwrap();
        assert_eq!(response.outcomes.len(), 1_000);
        t.elapsed()
    };
    let over_wire = || {
        let t = Instant::now();
        let response: ScoreBatchResponse = client
            .post(format!("http://{addr}/v1/score"))
            .json(&request)
            .send()
            .unwrap()
            .json()
            .unwrap();
        assert_eq!(response.outcomes.len(), 1_000);
        t.elapsed()
    };

    // Warm up both paths, then take the best of three to damp scheduler noise.
    in_process();
    over_wire();
    let base = (0..3).map(|_| in_process()).min().unwrap();
    let wire = (0..3).map(|_| over_wire()).min().unwrap();
    assert!(
        wire < base * 2,
        "service round-trip {wire:?} vs in-process {base:?}"
    );
    pass("10 throughput and service overhead");
}

// --- 11. determinism -----------------------------------------------------

#[test]
fn criterion_11_eval_reports_are_byte_identical() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        cmd_eval(
            &EvalOptions {
                dataset: fixtures.join("golden_dataset.jsonl"),
                responses: fixtures.join("golden_responses.jsonl"),
                out_dir: out.to_path_buf(),
                with_judge: false,
            },
            None,
        )
        .unwrap();
    };
    run(&dir.path().join("a"));
    run(&dir.path().join("b"));
    for name in ["report.json", "report.txt"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(name)).unwrap(),
            std::fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
    pass("11 eval report determinism");
}
