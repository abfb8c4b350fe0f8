use std::collections::HashSet;

use kaleido_core::codec::{encode_task, Task, TaskPrompt};
use kaleido_core::dataset::{build_subtasks, distinct_n, parse_corpus, serialize_corpus, split_by_situation, SituationRecord};
use kaleido_core::decision::{decide, entropy, WeightOverrides};
use kaleido_core::ethics::{utilitarian_actions, EthicsAdapter};
use kaleido_core::evalkit::{grouped_accuracy, label_accuracy, match_items};
use kaleido_core::pipeline::{candidate_order, Pipeline};
use kaleido_core::textsim::{content_overlap, cosine, rouge_l_sum, rouge_n};
use kaleido_core::types::normalize_distribution;
use kaleido_core::tuner::{gibbs_tune, Coordinate, ParamGrid, TemperatureSchedule, TuneConfig};
use kaleido_core::{
    Execution, FixtureBackend, FixtureData, GenerationCandidate, ScoredCandidate, SystemParams,
    ValenceDistribution, ValenceLabel, ValueEntry, ValueKind,
};
use proptest::prelude::*;

const WORDS: [&str; 8] = ["care", "honesty", "law", "safety", "family", "property", "trust", "the"];

fn kind_strategy() -> impl Strategy<Value = ValueKind> {
    prop_oneof![Just(ValueKind::Value), Just(ValueKind::Right), Just(ValueKind::Duty)]
}

fn dist_strategy() -> impl Strategy<Value = ValenceDistribution> {
    (0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(a, b, c)| normalize_distribution([a, b, c]).unwrap())
}

fn candidate_strategy() -> impl Strategy<Value = ScoredCandidate> {
    (kind_strategy(), prop::sample::select(WORDS.to_vec()), 0.01f64..=1.0, dist_strategy()).prop_map(|(k, w, r, v)| {
        ScoredCandidate {
            entry: ValueEntry::new(k, w).unwrap(),
            relevance: r,
            valence: v,
            beam_score: 0.0,
        }
    })
}

#[derive(Debug, Clone)]
struct Beam {
    kind: ValueKind,
    text: String,
    score: f64,
    relevance: f64,
    embed: Vec<f64>,
    valence: ValenceDistribution,
}

fn beam_strategy() -> impl Strategy<Value = Beam> {
    (
        kind_strategy(),
        prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..4),
        -3.0f64..0.0,
        prop::sample::select(vec![0.5, 0.8, 0.85, 0.9, 0.95, 0.99]),
        prop::collection::vec(0.05f64..1.0, 3),
        dist_strategy(),
    )
        .prop_map(|(kind, words, score, relevance, embed, valence)| Beam {
            kind,
            text: words.join(" "),
            score,
            relevance,
            embed,
            valence,
        })
}

const ACTION: &str = "a randomly generated situation";

fn fixture_for(beams: &[Beam], junk: bool) -> FixtureBackend {
    let mut f = FixtureData::default();
    let mut gens: Vec<GenerationCandidate> = Vec::new();
    let mut seen = HashSet::new();
    for b in beams {
        let target = format!("{}: {}", b.kind, b.text);
        // one score per distinct beam text, as a real backend would produce
        if !seen.insert(target.clone()) {
            continue;
        }
        gens.push(GenerationCandidate {
            text: target.clone(),
            score: b.score,
        });
        let rel = encode_task(&TaskPrompt::with_entry(Task::Relevance, ACTION, b.kind, b.text.as_str())).unwrap();
        f.add_classification(rel, [("Yes", b.relevance), ("No", 1.0 - b.relevance)]);
        let val = encode_task(&TaskPrompt::with_entry(Task::Valence, ACTION, b.kind, b.text.as_str())).unwrap();
        f.add_classification(
            val,
            [("Supports", b.valence.support), ("Opposes", b.valence.oppose), ("Either", b.valence.either)],
        );
        f.add_embedding(target, b.embed.clone());
    }
    if junk {
        gens.push(GenerationCandidate {
            text: "no kind here".into(),
            score: -0.5,
        });
    }
    gens.sort_by(|a, b| b.score.total_cmp(&a.score));
    f.add_generation(encode_task(&TaskPrompt::generate(ACTION)).unwrap(), gens);
    FixtureBackend::new(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decide_is_normalized_and_scale_invariant(
        cands in prop::collection::vec(candidate_strategy(), 1..8),
        c in 0.05f64..1.0,
        binary in any::<bool>(),
    ) {
        let a = decide(&cands, &WeightOverrides::new(), binary).unwrap();
        let sum: f64 = a.distribution.as_array().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        if binary {
            prop_assert_eq!(a.distribution.either, 0.0);
        }
        let scaled: Vec<ScoredCandidate> = cands.iter().cloned().map(|mut x| { x.relevance *= c; x }).collect();
        let b = decide(&scaled, &WeightOverrides::new(), binary).unwrap();
        for (x, y) in a.distribution.as_array().iter().zip(b.distribution.as_array()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let k = if binary { 2f64 } else { 3f64 };
        prop_assert!(a.entropy_nats >= 0.0 && a.entropy_nats <= k.ln() + 1e-12);
    }

    #[test]
    fn zero_weight_equals_removal(
        cands in prop::collection::vec(candidate_strategy(), 2..8),
        drop in prop::collection::vec(any::<bool>(), 8),
    ) {
        prop_assume!(drop.iter().take(cands.len()).any(|d| !d));
        let mut w = WeightOverrides::new();
        let mut kept = Vec::new();
        for (i, c) in cands.iter().enumerate() {
            if drop[i] { w.set(i, 0.0).unwrap(); } else { kept.push(c.clone()); }
        }
        let a = decide(&cands, &w, false).unwrap();
        let b = decide(&kept, &WeightOverrides::new(), false).unwrap();
        prop_assert_eq!(a.distribution, b.distribution);
    }

    #[test]
    fn entropy_zero_only_for_point_mass(d in dist_strategy()) {
        prop_assert!(entropy(&d) > 0.0);
        prop_assert_eq!(entropy(&ValenceDistribution::new(0.0, 1.0, 0.0).unwrap()), 0.0);
    }

    #[test]
    fn pipeline_output_invariants(beams in prop::collection::vec(beam_strategy(), 0..14), junk in any::<bool>()) {
        let backend = fixture_for(&beams, junk);
        let params = SystemParams::published();
        let pipe = Pipeline::new(&backend);
        let out = pipe.generate_values(ACTION, &params).unwrap();

        // sorted and thresholded
        for w in out.candidates.windows(2) {
            let a = (w[0].relevance, w[0].beam_score, w[0].entry.text.as_str());
            let b = (w[1].relevance, w[1].beam_score, w[1].entry.text.as_str());
            prop_assert!(candidate_order(a, b).is_le());
        }
        for c in &out.candidates {
            prop_assert!(c.relevance >= params.relevance_threshold.get(c.entry.kind));
        }
        // pairwise dissimilar within a kind
        let embeds = backend.data().embed.clone();
        for (i, a) in out.candidates.iter().enumerate() {
            for b in &out.candidates[i + 1..] {
                if a.entry.kind != b.entry.kind { continue; }
                prop_assert!(content_overlap(&a.entry, &b.entry).unwrap() < params.ngram_threshold);
                let ea = &embeds[&a.entry.generation_target()];
                let eb = &embeds[&b.entry.generation_target()];
                prop_assert!(cosine(ea, eb).unwrap() < params.embed_threshold.get(a.entry.kind));
            }
        }
        // nothing lost or duplicated
        let total_beams = backend.data().generate.values().next().unwrap().len();
        prop_assert_eq!(out.candidates.len() + out.dropped.len(), total_beams);

        // deterministic and mode independent
        let again = pipe.with_execution(Execution::Sequential).generate_values(ACTION, &params).unwrap();
        prop_assert_eq!(&out, &again);
    }

    #[test]
    fn raising_a_relevance_threshold_never_adds(beams in prop::collection::vec(beam_strategy(), 1..12), t in 0.5f64..1.0, kind in kind_strategy()) {
        let backend = fixture_for(&beams, false);
        let base = SystemParams::published();
        let mut strict = base;
        let raised = t.max(base.relevance_threshold.get(kind));
        strict.relevance_threshold.set(kind, raised);
        let pipe = Pipeline::new(&backend);
        let a = pipe.generate_values(ACTION, &base).unwrap();
        let b = pipe.generate_values(ACTION, &strict).unwrap();
        let count = |o: &kaleido_core::PipelineOutput| o.candidates.iter().filter(|c| c.entry.kind == kind).count();
        prop_assert!(count(&b) <= count(&a));
    }

    #[test]
    fn rouge_identity_and_symmetry(a in "[a-d ]{1,20}", b in "[a-d ]{1,20}") {
        let ab = rouge_n(&a, &b, 1);
        let ba = rouge_n(&b, &a, 1);
        prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.f1));
        if !a.trim().is_empty() {
            prop_assert_eq!(rouge_n(&a, &a, 1).f1, 1.0);
            prop_assert_eq!(rouge_l_sum(&[a.as_str()], &[a.as_str()]).f1, 1.0);
        }
    }

    #[test]
    fn overlap_symmetric(k in kind_strategy(), a in "[a-e]{1,3}( [a-e]{1,3}){0,3}", b in "[a-e]{1,3}( [a-e]{1,3}){0,3}") {
        let x = ValueEntry::new(k, a).unwrap();
        let y = ValueEntry::new(k, b).unwrap();
        let o = content_overlap(&x, &y).unwrap();
        prop_assert_eq!(o, content_overlap(&y, &x).unwrap());
        prop_assert!((0.0..=1.0).contains(&o));
    }

    #[test]
    fn corpus_fixpoint(records in prop::collection::vec(record_strategy(), 1..5)) {
        let text = serialize_corpus(&records).unwrap();
        let parsed = parse_corpus(&text).unwrap();
        prop_assert_eq!(&parsed, &records);
        prop_assert_eq!(parse_corpus(&serialize_corpus(&parsed).unwrap()).unwrap(), parsed);
    }

    #[test]
    fn subtasks_and_splits(records in prop::collection::vec(record_strategy(), 2..12), seed in any::<u64>()) {
        let entries: usize = records.iter().map(|r| r.entries.len()).sum();
        match build_subtasks(&records, seed) {
            Ok(rows) => {
                prop_assert_eq!(rows.len(), entries * 5);
                prop_assert_eq!(build_subtasks(&records, seed).unwrap(), rows.clone());
                for r in rows.iter().filter(|r| r.task == Task::Relevance && r.target == "No") {
                    let idx: usize = r.situation_id[1..].parse().unwrap();
                    let own: Vec<String> = records[idx].entries.iter().map(|e| e.text.clone()).collect();
                    let hit = own.iter().any(|t| r.input.ends_with(&format!(": {t}")));
                    prop_assert!(!hit);
                }
            }
            Err(_) => {
                // only possible when no situation offers a foreign entry
                let all: HashSet<&str> = records.iter().flat_map(|r| r.entries.iter().map(|e| e.text.as_str())).collect();
                let starved = records.iter().any(|r| {
                    let own: HashSet<&str> = r.entries.iter().map(|e| e.text.as_str()).collect();
                    !r.entries.is_empty() && all.iter().all(|t| own.contains(t))
                });
                prop_assert!(starved);
            }
        }
        let split = split_by_situation(records.len(), seed);
        prop_assert_eq!(split.sizes().iter().sum::<usize>(), records.len());
    }

    #[test]
    fn utilitarian_swap_identity(masses in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 8)) {
        let mut f = FixtureData::default();
        let pleasure = |a: &str| encode_task(&TaskPrompt::with_entry(Task::Valence, a, ValueKind::Value, "Pleasure")).unwrap();
        let actions: Vec<String> = utilitarian_actions("I ate cake", "I ate bread")
            .into_iter()
            .chain(utilitarian_actions("I ate bread", "I ate cake"))
            .collect();
        for (a, (s, o, e)) in actions.iter().zip(&masses) {
            f.add_classification(pleasure(a), [("Supports", s + 0.01), ("Opposes", *o), ("Either", *e)]);
        }
        let b = FixtureBackend::new(f);
        let ad = EthicsAdapter::new(&b);
        let x = ad.score_utilitarian("I ate cake", "I ate bread").unwrap();
        let y = ad.score_utilitarian("I ate bread", "I ate cake").unwrap();
        prop_assert_eq!(x.positive, y.negative);
        prop_assert_eq!(x.negative, y.positive);
    }

    #[test]
    fn grouped_never_exceeds_label(preds in prop::collection::vec(0u8..2, 1..10), golds_seed in prop::collection::vec(0u8..2, 40)) {
        let n = preds.len() * 4;
        let p: Vec<u8> = preds.iter().cycle().take(n).copied().collect();
        let g: Vec<u8> = golds_seed.iter().cycle().take(n).copied().collect();
        prop_assert!(grouped_accuracy(&p, &g, 4).unwrap() <= label_accuracy(&p, &g).unwrap());
    }

    #[test]
    fn set_matching_is_one_to_one(
        gen in prop::collection::vec((kind_strategy(), "[a-c]( [a-c]){0,2}"), 0..6),
        refs in prop::collection::vec((kind_strategy(), "[a-c]( [a-c]){0,2}"), 0..6),
    ) {
        let g: Vec<ValueEntry> = gen.into_iter().map(|(k, t)| ValueEntry::new(k, t).unwrap()).collect();
        let r: Vec<ValueEntry> = refs.into_iter().map(|(k, t)| ValueEntry::new(k, t).unwrap()).collect();
        let m = match_items(&g, &r);
        prop_assert!(m.len() <= g.len().min(r.len()));
        let gi: HashSet<usize> = m.iter().map(|x| x.generated).collect();
        let ri: HashSet<usize> = m.iter().map(|x| x.reference).collect();
        prop_assert_eq!(gi.len(), m.len());
        prop_assert_eq!(ri.len(), m.len());
    }

    #[test]
    fn distinct_n_bounded(texts in prop::collection::vec("[a-c]( [a-c]){0,5}", 0..6), n in 1usize..4) {
        let d = distinct_n(&texts, n);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn tuner_best_is_monotone(seed in any::<u64>(), t in 0.0f64..0.5, cx in 0.0f64..1.0, cy in 0.0f64..1.0) {
        let axis = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let mut grid = ParamGrid::point(&SystemParams::published());
        let mut init = SystemParams::published();
        for c in Coordinate::ALL {
            grid.set_axis(c, axis.clone());
            c.set(&mut init, 0.2);
        }
        let cfg = TuneConfig { sweeps: 2, schedule: TemperatureSchedule::Constant { temperature: t }, seed, exec: Execution::Sequential };
        let obj = |p: &SystemParams| Ok(-(p.relevance_threshold.value - cx).powi(2) - (p.embed_threshold.duty - cy).powi(2) - p.ngram_threshold);
        let trace = gibbs_tune(&grid, &init, &cfg, obj).unwrap();
        prop_assert!(trace.visited.windows(2).all(|w| w[0].best_so_far <= w[1].best_so_far));
        let max = trace.visited.iter().map(|s| s.objective).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(trace.best_objective, max);
        prop_assert_eq!(obj(&trace.best_params).unwrap(), trace.best_objective);
        prop_assert!(trace.best_objective >= obj(&init).unwrap());
    }
}

fn record_strategy() -> impl Strategy<Value = SituationRecord> {
    let entry = (
        kind_strategy(),
        "[A-Z][a-z]{2,8}( [a-z]{2,6}){0,2}",
        "[a-z]{1,6}( [a-z,.']{1,8}){0,6}",
        prop_oneof![Just(ValenceLabel::Supports), Just(ValenceLabel::Opposes), Just(ValenceLabel::Either)],
    )
        .prop_map(|(k, name, expl, label)| ValueEntry::new(k, name).unwrap().with_explanation(expl).with_label(label));
    ("[a-z]{2,8}( [a-z]{2,8}){0,4}", prop::collection::vec(entry, 0..7)).prop_map(|(situation, mut entries)| {
        // canonical order is by kind
        entries.sort_by_key(|e| e.kind as u8);
        SituationRecord { situation, entries }
    })
}

