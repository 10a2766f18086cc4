//! Shared fixture for the binary-driving test suites: a planted miniature
//! dataset (annotations, embedding stores, config) whose metric values are
//! all hand-computable.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use genbias_core::corpus::{
    read_corpus_tsv, write_corpus_tsv, Gender, GenderLexicon, ImageRecord, Split,
};
use genbias_core::embed::EmbeddingStore;

pub const MALE_WORDS: [&str; 2] = ["skateboard", "surfboard"];
pub const FEMALE_WORDS: [&str; 2] = ["kitchen", "garden"];

/// Everything a run needs on disk: annotations, embedding stores, config.
pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub root: PathBuf,
    pub config: PathBuf,
}

pub fn genbias(workspace: &Workspace, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genbias"))
        .arg("--config")
        .arg(&workspace.config)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn assert_ok(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn assert_fails_mentioning(output: &Output, needle: &str) {
    assert!(!output.status.success(), "command unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains(needle),
        "stderr should mention {needle:?}: {stderr}"
    );
}

pub fn out_path(workspace: &Workspace, name: &str) -> PathBuf {
    workspace.root.join("out").join(name)
}

/// A caption built from one gendered word and shared activity vocabulary,
/// plus a unique landmark token per image for TF-IDF texture.
pub fn caption(gender: Gender, index: usize) -> String {
    let (noun, words) = match gender {
        Gender::Male => ("man", MALE_WORDS),
        Gender::Female => ("woman", FEMALE_WORDS),
    };
    format!(
        "A {noun} with a {} near landmark{index}.",
        words[index % words.len()]
    )
}

fn annotation_json(ids: &[(i64, String)], first_person_ids: usize) -> (String, String) {
    let captions: Vec<String> = ids
        .iter()
        .enumerate()
        .map(|(i, (id, text))| {
            format!(
                r#"{{"id": {}, "image_id": {id}, "caption": "{text}"}}"#,
                i + 1
            )
        })
        .collect();
    let instances: Vec<String> = ids
        .iter()
        .take(first_person_ids)
        .map(|(id, _)| format!(r#"{{"image_id": {id}, "category_id": 1}}"#))
        .collect();
    (
        format!(r#"{{"annotations": [{}]}}"#, captions.join(", ")),
        format!(
            r#"{{"categories": [{{"id": 1, "name": "person"}}], "annotations": [{}]}}"#,
            instances.join(", ")
        ),
    )
}

fn axis(dim: usize, index: usize, identity: usize) -> Vec<f32> {
    let mut v = vec![0.0; dim];
    v[index] = 1.0;
    v[identity] = 0.2;
    v
}

/// Builds the fixture dataset: 8 train images (4m/4f), 14 val images
/// (6m/6f/2 undefined), planted embedding stores, and a config wiring it all.
///
/// The geometry makes every downstream number hand-computable: image and
/// query vectors sit on a gender axis with a small identity component, so an
/// embedding model retrieves the query's own gender first (per-query bias
/// ±1, MaxSkew exactly ln 2), zero-shot classification and self-retrieval
/// saturate, and exactly one planted edit fails the KNN filter.
pub fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let data = root.join("data");
    fs::create_dir(&data).unwrap();

    // --- annotations --------------------------------------------------
    let mut train = Vec::new();
    for i in 0..4i64 {
        train.push((100 + i, caption(Gender::Male, i as usize)));
    }
    for i in 0..4i64 {
        train.push((110 + i, caption(Gender::Female, i as usize)));
    }
    let (captions_train, instances_train) = annotation_json(&train, train.len());
    fs::write(data.join("captions_train.json"), captions_train).unwrap();
    fs::write(data.join("instances_train.json"), instances_train).unwrap();

    let mut val = Vec::new();
    for i in 0..6i64 {
        val.push((200 + i, caption(Gender::Male, i as usize)));
    }
    for i in 0..6i64 {
        val.push((210 + i, caption(Gender::Female, i as usize)));
    }
    val.push((220, "An empty bowl on a table.".to_string()));
    val.push((221, "A quiet street at dawn.".to_string()));
    let (captions_val, instances_val) = annotation_json(&val, 12);
    fs::write(data.join("captions_val.json"), captions_val).unwrap();
    fs::write(data.join("instances_val.json"), instances_val).unwrap();

    // --- embedding stores ----------------------------------------------
    // Axes 0/1/2 = male/female/undefined; per-entry identity axes follow.
    // Stores share one universe of entries so one geometry serves eval,
    // filter, and verify.
    let male = |id: i64| (100..104).contains(&id) || (200..206).contains(&id);
    let female = |id: i64| (110..114).contains(&id) || (210..216).contains(&id);
    let gender_axis = |id: i64| {
        if male(id) {
            0
        } else if female(id) {
            1
        } else {
            2
        }
    };

    let val_ids: Vec<i64> = (200..206).chain(210..216).chain([220, 221]).collect();
    let train_ids: Vec<i64> = (100..104).chain(110..114).collect();
    let edits = [
        ("200_m", 0),
        ("200_f", 1),
        ("201_m", 0),
        ("201_f", 2), // planted failure: sits on the undefined axis
    ];
    let entries = val_ids.len() + train_ids.len() + edits.len();
    let dim = 3 + entries;
    let mut next_identity = 3;
    let mut identity = || {
        let slot = next_identity;
        next_identity += 1;
        slot
    };

    let store = |rows: Vec<(String, Vec<f32>)>| {
        let ids = rows.iter().map(|(id, _)| id.clone()).collect();
        let data: Vec<f32> = rows.into_iter().flat_map(|(_, v)| v).collect();
        EmbeddingStore::from_rows(ids, dim, data, false)
            .unwrap()
            .l2_normalize()
            .unwrap()
    };
    let save = |store: &EmbeddingStore, stem: &str| {
        store
            .save(&data.join(format!("{stem}.json")), &data.join(format!("{stem}.bin")))
            .unwrap();
    };

    // One identity slot per entry, shared across stores keyed by that entry.
    let mut slots: Vec<(String, usize, usize)> = Vec::new(); // (id, axis, identity)
    for &id in val_ids.iter().chain(&train_ids) {
        slots.push((id.to_string(), gender_axis(id), identity()));
    }
    for (id, axis_index) in edits {
        slots.push((id.to_string(), axis_index, identity()));
    }
    let slot = |id: &str| -> (usize, usize) {
        let (_, a, i) = slots
            .iter()
            .find(|(slot_id, _, _)| slot_id == id)
            .expect("known id");
        (*a, *i)
    };

    // Image vectors: gender axis + weak identity, for every val image + edit.
    let image_rows: Vec<(String, Vec<f32>)> = val_ids
        .iter()
        .map(|id| id.to_string())
        .chain(edits.iter().map(|(id, _)| id.to_string()))
        .map(|id| {
            let (a, i) = slot(&id);
            (id, axis(dim, a, i))
        })
        .collect();
    let images = store(image_rows);
    save(&images, "images");

    // Query vectors under `<id>#0`: same axis, stronger identity pull, for
    // labeled val images and the edits.
    let query_rows: Vec<(String, Vec<f32>)> = val_ids
        .iter()
        .filter(|&&id| male(id) || female(id))
        .map(|id| id.to_string())
        .chain(edits.iter().map(|(id, _)| id.to_string()))
        .map(|id| {
            let (a, i) = slot(&id);
            let mut v = axis(dim, a, i);
            v[i] = 0.4;
            (format!("{id}#0"), v)
        })
        .collect();
    let queries = store(query_rows);
    save(&queries, "captions");

    // Person-crop vectors for the KNN filter: all labeled reals + edits.
    let crop_rows: Vec<(String, Vec<f32>)> = train_ids
        .iter()
        .chain(&val_ids)
        .filter(|&&id| male(id) || female(id))
        .map(|id| id.to_string())
        .chain(edits.iter().map(|(id, _)| id.to_string()))
        .map(|id| {
            let (a, i) = slot(&id);
            (id, axis(dim, a, i))
        })
        .collect();
    let crops = store(crop_rows);
    save(&crops, "crops");

    // Gender prompt vectors.
    let prompts = store(vec![
        ("male".to_string(), axis(dim, 0, 3)),
        ("female".to_string(), axis(dim, 1, 4)),
    ]);
    save(&prompts, "prompts");

    // Per-image caption vectors for clustering, keyed by image id.
    let cluster_rows: Vec<(String, Vec<f32>)> = val_ids
        .iter()
        .filter(|&&id| male(id) || female(id))
        .map(|&id| {
            let (a, i) = slot(&id.to_string());
            (id.to_string(), axis(dim, a, i))
        })
        .collect();
    let cluster_store = store(cluster_rows);
    save(&cluster_store, "cluster_captions");

    // --- config ---------------------------------------------------------
    let config = root.join("run.toml");
    fs::write(
        &config,
        r#"dataset_tag = "mini"
seeds = [11, 13]

[paths]
out_dir = "out"
captions_train = "data/captions_train.json"
instances_train = "data/instances_train.json"
captions_val = "data/captions_val.json"
instances_val = "data/instances_val.json"

[eval]
split = "val"
ks = [3, 5]
variants = ["unbalanced", "balanced"]
models = ["random", "tfidf", "clip"]
write_runs = true

[models.clip]
caption_manifest = "data/captions.json"
caption_blob = "data/captions.bin"
image_manifest = "data/images.json"
image_blob = "data/images.bin"

[filter]
k_neighbors = 5
tau_real = 0.4
tau_gender = 0.5
embedding_manifest = "data/crops.json"
embedding_blob = "data/crops.bin"

[verify]
image_manifest = "data/images.json"
image_blob = "data/images.bin"
prompt_manifest = "data/prompts.json"
prompt_blob = "data/prompts.bin"
query_manifest = "data/captions.json"
query_blob = "data/captions.bin"

[cluster]
split = "val"
m = 2
seed = 0
max_iters = 100
n_terms = 3
caption_manifest = "data/cluster_captions.json"
caption_blob = "data/cluster_captions.bin"
"#,
    )
    .unwrap();

    Workspace { dir, root, config }
}

/// Appends the four planted synthetic edits to the labeled corpus, the way
/// an external image editor's export step would. The edits carry swapped
/// captions, so they come out gender-labeled — the dataset diagnostics
/// (`cluster-report`, `probe`) must still ignore them.
pub fn inject_edits(workspace: &Workspace) {
    let path = out_path(workspace, "corpus.tsv");
    let corpus = read_corpus_tsv(&path, GenderLexicon::builtin()).unwrap();
    let mut records = corpus.records().to_vec();
    for (slot, (id, gender)) in [
        ("200_m", Gender::Male),
        ("200_f", Gender::Female),
        ("201_m", Gender::Male),
        ("201_f", Gender::Female),
    ]
    .into_iter()
    .enumerate()
    {
        let base = &id[..3];
        records.push(ImageRecord::synthetic(
            id,
            Split::Val,
            vec![caption(gender, 90 + slot)],
            1,
            gender,
            base,
            "swap-v1",
            "cfg-7.5",
        ));
    }
    let mut corpus = genbias_core::corpus::Corpus::new(records, GenderLexicon::builtin()).unwrap();
    corpus.assign_gender_labels();
    write_corpus_tsv(&corpus, &path).unwrap();
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
        .lines()
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect()
}
