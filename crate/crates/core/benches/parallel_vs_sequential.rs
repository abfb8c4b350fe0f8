use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kaleido_core::codec::{encode_task, Task, TaskPrompt};
use kaleido_core::dataset::{parse_corpus, serialize_corpus, SituationRecord};
use kaleido_core::ethics::{predict_all, EthicsExample};
use kaleido_core::{Execution, FixtureBackend, FixtureData, GenerationCandidate, Pipeline, SystemParams, ValenceLabel, ValueEntry, ValueKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ACTION: &str = "returning a lost wallet with the cash missing";
const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn synthetic_backend(beams: usize, dim: usize) -> FixtureBackend {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut data = FixtureData::default();
    let mut gens = Vec::with_capacity(beams);
    for i in 0..beams {
        let kind = ValueKind::ALL[i % 3];
        let text = format!("candidate {i} about topic {}", i % 17);
        let rel = encode_task(&TaskPrompt::with_entry(Task::Relevance, ACTION, kind, text.as_str())).unwrap();
        let r: f64 = rng.random_range(0.7..1.0);
        data.add_classification(rel, [("Yes", r), ("No", 1.0 - r)]);
        let val = encode_task(&TaskPrompt::with_entry(Task::Valence, ACTION, kind, text.as_str())).unwrap();
        data.add_classification(val, [("Supports", rng.random::<f64>() + 0.01), ("Opposes", rng.random()), ("Either", rng.random())]);
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        data.add_embedding(format!("{kind}: {text}"), v);
        gens.push(GenerationCandidate {
            text: format!("{kind}: {text}"),
            score: -(i as f64) / beams as f64,
        });
    }
    data.add_generation(encode_task(&TaskPrompt::generate(ACTION)).unwrap(), gens);
    FixtureBackend::new(data)
}

fn bench_pipeline(c: &mut Criterion) {
    let backend = synthetic_backend(300, 384);
    let mut params = SystemParams::published();
    params.beam_count = 300;
    let mut group = c.benchmark_group("generate_values");
    for (name, exec) in MODES {
        let pipe = Pipeline::new(&backend).with_execution(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(pipe.generate_values(ACTION, &params).unwrap()))
        });
    }
    group.finish();
}

fn bench_ethics(c: &mut Criterion) {
    let mut data = FixtureData::default();
    let examples: Vec<EthicsExample> = (0..2000)
        .map(|i| {
            let scenario = format!("I borrowed tool number {i} and returned it late");
            let p = encode_task(&TaskPrompt::with_entry(Task::Valence, scenario.as_str(), ValueKind::Value, "Fairness")).unwrap();
            data.add_classification(p, [("Supports", 0.6), ("Opposes", 0.3), ("Either", 0.1)]);
            EthicsExample::Justice { scenario, label: (i % 2) as u8 }
        })
        .collect();
    let backend = FixtureBackend::new(data);
    let mut group = c.benchmark_group("ethics_predict_all");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(predict_all(&backend, &examples, exec).unwrap()))
        });
    }
    group.finish();
}

fn bench_corpus(c: &mut Criterion) {
    let records: Vec<SituationRecord> = (0..400)
        .map(|i| SituationRecord {
            situation: format!("situation number {i}"),
            entries: ValueKind::ALL
                .iter()
                .map(|k| {
                    ValueEntry::new(*k, format!("{k} item {i}"))
                        .unwrap()
                        .with_explanation("a short explanation of why this matters")
                        .with_label(ValenceLabel::Either)
                })
                .collect(),
        })
        .collect();
    let text = serialize_corpus(&records).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for i in 0..16 {
        std::fs::write(dir.path().join(format!("batch_{i:02}.txt")), &text).unwrap();
    }
    assert_eq!(parse_corpus(&text).unwrap().len(), 400);
    let mut group = c.benchmark_group("parse_corpus_dir");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(kaleido_core::dataset::parse_corpus_dir(dir.path(), exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_pipeline, bench_ethics, bench_corpus);
criterion_main!(benches);
