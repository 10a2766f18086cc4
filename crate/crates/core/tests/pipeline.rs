//! End-to-end smoke over a planted miniature dataset: labels, neutralization,
//! retrieval, bias metrics, the synthetic-edit filter, contrast assembly,
//! zero-shot verification, clustering, and the caption probe all interlock
//! the way the individual module docs promise.

use std::collections::{BTreeMap, HashMap};
use std::fs;

use genbias_core::corpus::{
    write_contrast_set_csv, Corpus, Gender, GenderLabel, GenderLexicon, ImageRecord, Split,
};
use genbias_core::embed::EmbeddingStore;
use genbias_core::filter::{filter_dataset, write_decisions_csv, FilterConfig};
use genbias_core::metrics::{
    bias_at_k, desired_from_dataset, mean_max_skew_at_k, write_bias_report_csv, BiasReport,
    MetricKind, MetricValue,
};
use genbias_core::retrieval::{
    embedding_retrieve, random_retrieve, with_rank_scores, zero_shot_gender, FEMALE_PROMPT_ID,
    MALE_PROMPT_ID,
};
use genbias_core::rng::derive_seed;
use genbias_core::spurious::{
    auc, average_caption_features, build_cluster_report, kmeans, train_probe, KmeansConfig,
    ProbeHyper,
};

const MALE_ACTIVITIES: [&str; 10] = [
    "skateboard ramp", "surfboard wave", "baseball bat", "motorcycle road", "laptop desk",
    "pizza oven", "frisbee field", "snowboard slope", "guitar stage", "kite beach",
];
const FEMALE_ACTIVITIES: [&str; 10] = [
    "kitchen counter", "umbrella street", "tennis court", "horse meadow", "book bench",
    "cake table", "flower garden", "bicycle path", "market stall", "scarf winter",
];

/// Ten male, ten female, and four undefined val records. Each labeled record
/// gets a distinct activity phrase so retrieval, clustering, and the probe
/// all have recoverable structure.
fn planted_corpus() -> Corpus {
    let mut records = Vec::new();
    for (i, activity) in MALE_ACTIVITIES.iter().enumerate() {
        records.push(ImageRecord::real(
            format!("m{i:02}"),
            Split::Val,
            vec![format!("A man with a {activity}.")],
            1,
        ));
    }
    for (i, activity) in FEMALE_ACTIVITIES.iter().enumerate() {
        records.push(ImageRecord::real(
            format!("f{i:02}"),
            Split::Val,
            vec![format!("A woman with a {activity}.")],
            1,
        ));
    }
    for i in 0..4 {
        records.push(ImageRecord::real(
            format!("u{i:02}"),
            Split::Val,
            vec![format!("An empty plate number {i}.")],
            0,
        ));
    }
    let mut corpus = Corpus::new(records, GenderLexicon::builtin()).unwrap();
    corpus.assign_gender_labels();
    corpus
}

fn labels_of(corpus: &Corpus) -> HashMap<String, GenderLabel> {
    corpus
        .records()
        .iter()
        .map(|r| (r.id.clone(), r.gender_label))
        .collect()
}

/// Unit vector along one of `dim` axes.
fn axis(dim: usize, index: usize) -> Vec<f32> {
    let mut v = vec![0.0; dim];
    v[index] = 1.0;
    v
}

/// Image store whose vectors lie on a gender axis (male = axis 0, female =
/// axis 1, undefined = axis 2) with a small per-image identity component, so
/// every vector is distinct but gender dominates similarity.
fn planted_image_store(corpus: &Corpus) -> EmbeddingStore {
    let records = corpus.records();
    let dim = 3 + records.len();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let gender_axis = match record.gender_label {
            GenderLabel::Male => 0,
            GenderLabel::Female => 1,
            GenderLabel::Undefined => 2,
        };
        let mut v = axis(dim, gender_axis);
        v[3 + i] = 0.2;
        ids.push(record.id.clone());
        data.extend(v);
    }
    EmbeddingStore::from_rows(ids, dim, data, false)
        .unwrap()
        .l2_normalize()
        .unwrap()
}

/// Caption store with one query vector per labeled record, all pointing at
/// the male axis — a maximally male-biased model.
fn male_pointing_caption_store(corpus: &Corpus, dim: usize) -> EmbeddingStore {
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for record in corpus.records() {
        if record.gender_label == GenderLabel::Undefined {
            continue;
        }
        ids.push(format!("{}#0", record.id));
        data.extend(axis(dim, 0));
    }
    EmbeddingStore::from_rows(ids, dim, data, true).unwrap()
}

#[test]
fn planted_gender_axis_saturates_bias_and_max_skew() {
    let corpus = planted_corpus();
    let labels = labels_of(&corpus);
    let images = planted_image_store(&corpus);
    let captions = male_pointing_caption_store(&corpus, images.dim());
    let pool: Vec<String> = corpus.ids().map(String::from).collect();

    let k = 5;
    let mut rankings = Vec::new();
    for record in corpus.records() {
        if record.gender_label == GenderLabel::Undefined {
            continue;
        }
        let query = format!("{}#0", record.id);
        let mut ranked = embedding_retrieve(&captions, &images, &query, &pool, k + 1).unwrap();
        ranked.retain(|(id, _)| *id != record.id);
        ranked.truncate(k);
        rankings.push(ranked);
    }

    // Every query's top-k is all-male, so Bias@K saturates at +1 and MaxSkew
    // is exactly ln(1 / 0.5) against the 50/50 pool proportions.
    assert_eq!(bias_at_k(&rankings, &labels, k).unwrap(), 1.0);
    let desired = desired_from_dataset(&labels, &pool).unwrap();
    let (skew, contributing) = mean_max_skew_at_k(&rankings, &labels, &desired, k).unwrap();
    assert_eq!(contributing, rankings.len());
    assert!((skew - 2.0_f64.ln()).abs() < 1e-12, "MaxSkew {skew}");

    // Mirroring the query vectors onto the female axis negates Bias@K.
    let mirrored: Vec<Vec<(String, f64)>> = rankings
        .iter()
        .map(|ranking| {
            ranking
                .iter()
                .map(|(id, score)| {
                    let flipped = if let Some(rest) = id.strip_prefix('m') {
                        format!("f{rest}")
                    } else if let Some(rest) = id.strip_prefix('f') {
                        format!("m{rest}")
                    } else {
                        id.clone()
                    };
                    (flipped, *score)
                })
                .collect()
        })
        .collect();
    assert_eq!(bias_at_k(&mirrored, &labels, k).unwrap(), -1.0);
}

#[test]
fn random_retrieval_on_a_balanced_pool_is_nearly_unbiased() {
    let corpus = planted_corpus();
    let balanced = corpus.balance_by_gender(derive_seed(42, 0)).unwrap();
    let labels = labels_of(&balanced);
    let pool: Vec<String> = balanced.ids().map(String::from).collect();
    assert_eq!(pool.len(), 20, "10 of each gender survive balancing");

    let k = 5;
    let mut per_seed = Vec::new();
    for seed in 0..50u64 {
        let mut rankings = Vec::new();
        for (i, record) in balanced.records().iter().enumerate() {
            let ids = random_retrieve(&pool, k + 1, derive_seed(seed, 2 * i as u64 + 1)).unwrap();
            let mut ids: Vec<String> = ids.into_iter().filter(|id| *id != record.id).collect();
            ids.truncate(k);
            rankings.push(with_rank_scores(ids));
        }
        per_seed.push(bias_at_k(&rankings, &labels, k).unwrap());
    }
    let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    // 1000 draws of a zero-mean δ: anything beyond 0.1 would be ~5 sigma.
    assert!(mean.abs() < 0.1, "random Bias@5 drifted to {mean}");
}

/// Adds four edits per planted base: for each target gender one edit embedded
/// among real images of that gender (should pass) and one embedded on the
/// undefined axis far from everything real (should fail on p_real).
fn corpus_with_edits() -> (Corpus, EmbeddingStore) {
    let base = planted_corpus();
    let mut records = base.records().to_vec();
    let dim = 3 + records.len() + 8;

    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, record) in base.records().iter().enumerate() {
        let gender_axis = match record.gender_label {
            GenderLabel::Male => 0,
            GenderLabel::Female => 1,
            GenderLabel::Undefined => 2,
        };
        let mut v = axis(dim, gender_axis);
        v[3 + i] = 0.2;
        ids.push(record.id.clone());
        data.extend(v);
    }

    let bases = ["m00", "m01"];
    let mut next_identity = 3 + base.len();
    for (b, base_id) in bases.iter().enumerate() {
        for (gender, gender_axis) in [(Gender::Male, 0), (Gender::Female, 1)] {
            for quality in ["good", "bad"] {
                let id = format!("{base_id}_{}_{quality}", gender.as_str());
                records.push(ImageRecord::synthetic(
                    id.clone(),
                    Split::Val,
                    vec![format!("Edited picture {b} toward {}.", gender.as_str())],
                    1,
                    gender,
                    *base_id,
                    "swap-v1",
                    "cfg-7.5",
                ));
                let mut v = if quality == "good" {
                    // Nestled among the real images of the target gender.
                    axis(dim, gender_axis)
                } else {
                    // Off on the undefined axis: neighbours are undefined
                    // reals (excluded from the population) and other bad
                    // edits, so p_real collapses.
                    axis(dim, 2)
                };
                v[next_identity] = 0.2;
                next_identity += 1;
                ids.push(id);
                data.extend(v);
            }
        }
    }

    let mut corpus = Corpus::new(records, GenderLexicon::builtin()).unwrap();
    corpus.assign_gender_labels();
    let store = EmbeddingStore::from_rows(ids, dim, data, false)
        .unwrap()
        .l2_normalize()
        .unwrap();
    (corpus, store)
}

#[test]
fn knn_filter_keeps_planted_edits_and_rejects_planted_failures() {
    let (corpus, store) = corpus_with_edits();
    let config = FilterConfig {
        k_neighbors: 5,
        tau_real: 0.4,
        tau_gender: 0.5,
        ..FilterConfig::clip_default()
    };

    let decisions = filter_dataset(&corpus, &store, &config).unwrap();
    assert_eq!(decisions.len(), 8);
    for decision in &decisions {
        let expected = decision.edit_id.ends_with("_good");
        assert_eq!(
            decision.accepted, expected,
            "edit {} scored p_real {}, p_gender {}",
            decision.edit_id, decision.p_real, decision.p_gender
        );
    }

    // Both bases kept one edit per gender, so both survive assembly.
    let set = corpus.assemble_contrast_set(&decisions, 7).unwrap();
    assert_eq!(set.len(), 2);
    for pair in set.pairs() {
        assert!(pair.male_edit_id.ends_with("_good"));
        assert!(pair.female_edit_id.ends_with("_good"));
    }
}

#[test]
fn zero_shot_recovers_planted_genders() {
    let corpus = planted_corpus();
    let images = planted_image_store(&corpus);
    let dim = images.dim();
    let prompts = EmbeddingStore::from_rows(
        vec![MALE_PROMPT_ID.to_string(), FEMALE_PROMPT_ID.to_string()],
        dim,
        [axis(dim, 0), axis(dim, 1)].concat(),
        true,
    )
    .unwrap();

    for record in corpus.records() {
        let Some(gender) = record.gender_label.as_gender() else {
            continue;
        };
        assert_eq!(
            zero_shot_gender(&images, &prompts, &record.id).unwrap(),
            gender,
            "image {}",
            record.id
        );
    }
}

#[test]
fn clustering_and_probe_recover_the_planted_context_split() {
    let corpus = planted_corpus();
    let labeled = Corpus::new(
        corpus
            .records()
            .iter()
            .filter(|r| r.gender_label != GenderLabel::Undefined)
            .cloned()
            .collect(),
        corpus.lexicon().clone(),
    )
    .unwrap();

    // Per-caption embeddings on two activity axes; averaging then clustering
    // must rediscover the male/female activity split.
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut image_to_captions = BTreeMap::new();
    for record in labeled.records() {
        let caption_id = format!("{}#0", record.id);
        let axis_index = match record.gender_label {
            GenderLabel::Male => 0,
            _ => 1,
        };
        ids.push(caption_id.clone());
        data.extend(axis(4, axis_index));
        image_to_captions.insert(record.id.clone(), vec![caption_id]);
    }
    let caption_store = EmbeddingStore::from_rows(ids, 4, data, true).unwrap();

    let averaged = average_caption_features(&caption_store, &image_to_captions).unwrap();
    let result = kmeans(
        &averaged,
        &KmeansConfig {
            m: 2,
            seed: 0,
            max_iters: 100,
        },
    )
    .unwrap();

    let report = build_cluster_report(&labeled, result.assignment(), 3, None).unwrap();
    assert_eq!(report.global_male_pct, 50.0);
    assert_eq!(report.clusters.len(), 2);
    let mut deltas: Vec<f64> = report.clusters.iter().map(|c| c.delta_m).collect();
    deltas.sort_by(f64::total_cmp);
    // One all-male and one all-female cluster: ΔM = ±50 points.
    assert_eq!(deltas, vec![-50.0, 50.0]);
    for cluster in &report.clusters {
        assert_eq!(cluster.member_image_ids.len(), 10);
        // Characteristic terms describe activities, not gendered words.
        for term in &cluster.top_terms {
            assert!(
                !["man", "woman"].contains(&term.as_str()),
                "gendered term {term:?} leaked into cluster vocabulary"
            );
        }
    }

    // The probe separates the same split perfectly from neutralized text.
    let examples: Vec<(String, Gender)> = labeled
        .neutralized()
        .records()
        .iter()
        .map(|r| (r.captions[0].clone(), r.gender_label.as_gender().unwrap()))
        .collect();
    let (model, losses) = train_probe(
        &examples,
        labeled.lexicon(),
        &ProbeHyper::default(),
    )
    .unwrap();
    let scores: Vec<f64> = examples.iter().map(|(text, _)| model.score(text)).collect();
    let truth: Vec<bool> = examples.iter().map(|(_, g)| *g == Gender::Male).collect();
    assert_eq!(auc(&scores, &truth).unwrap(), 1.0);
    assert!(losses.last().unwrap() < &losses[0]);
}

#[test]
fn the_whole_loop_writes_identical_artifacts_across_runs() {
    let run = |dir: &std::path::Path| {
        let (corpus, store) = corpus_with_edits();
        let labels = labels_of(&corpus);

        // Retrieval + bias report under one fixed seed.
        let pool: Vec<String> = corpus.ids().map(String::from).collect();
        let k = 5;
        let mut rankings = Vec::new();
        for (i, record) in corpus.records().iter().enumerate() {
            if record.gender_label == GenderLabel::Undefined || !record.origin.is_real() {
                continue;
            }
            let ids = random_retrieve(&pool, k + 1, derive_seed(9, 2 * i as u64 + 1)).unwrap();
            let mut ids: Vec<String> = ids.into_iter().filter(|id| *id != record.id).collect();
            ids.truncate(k);
            rankings.push(with_rank_scores(ids));
        }
        let mut report = BiasReport::new("random", "planted-val", rankings.len());
        report
            .insert(
                MetricKind::Bias,
                k,
                MetricValue {
                    mean: bias_at_k(&rankings, &labels, k).unwrap(),
                    std: 0.0,
                    n_seeds: 1,
                },
            )
            .unwrap();
        write_bias_report_csv(&[report], &dir.join("bias_report.csv")).unwrap();

        // Filter + contrast set under the same seeds.
        let config = FilterConfig {
            k_neighbors: 5,
            tau_real: 0.4,
            tau_gender: 0.5,
            ..FilterConfig::clip_default()
        };
        let decisions = filter_dataset(&corpus, &store, &config).unwrap();
        write_decisions_csv(&decisions, &dir.join("decisions.csv")).unwrap();
        let set = corpus.assemble_contrast_set(&decisions, 7).unwrap();
        write_contrast_set_csv(&set, &dir.join("contrast.csv")).unwrap();
    };

    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    run(first.path());
    run(second.path());

    for name in ["bias_report.csv", "decisions.csv", "contrast.csv"] {
        let a = fs::read(first.path().join(name)).unwrap();
        let b = fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}
