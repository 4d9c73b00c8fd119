//! Synthetic corpora shared by the integration tests.

#![allow(dead_code)]

use se3m::corpus::{Cleaner, LabeledCorpus, RequirementRecord, Stopwords, UnlabeledCorpus};
use se3m::rng::RngStream;

/// Each topic pairs actors, actions and objects that co-occur.
pub const TOPICS: &[(&[&str], &[&str], &[&str])] = &[
    (&["admin", "operator"], &["configure", "restart"], &["server", "cluster", "node"]),
    (&["customer", "buyer"], &["order", "purchase"], &["product", "basket", "voucher"]),
    (&["analyst", "manager"], &["export", "review"], &["report", "chart", "dashboard"]),
    (&["developer", "tester"], &["debug", "deploy"], &["build", "branch", "pipeline"]),
];

/// Topics whose words never appear in [`TOPICS`].
pub const DOMAIN_TOPICS: &[(&[&str], &[&str], &[&str])] = &[
    (&["surgeon", "nurse"], &["schedule", "sterilize"], &["ward", "theatre", "scalpel"]),
    (&["pilot", "mechanic"], &["inspect", "refuel"], &["engine", "runway", "cockpit"]),
];

fn pick<'a>(words: &[&'a str], rng: &mut RngStream) -> &'a str {
    words[rng.below(words.len())]
}

fn sentence(topic: &(&[&str], &[&str], &[&str]), rng: &mut RngStream) -> String {
    let (actors, verbs, objects) = topic;
    format!(
        "as a {} i want to {} the {}.",
        pick(actors, rng),
        pick(verbs, rng),
        pick(objects, rng)
    )
}

/// `docs` documents of `per_doc` sentences, each document on one topic.
pub fn documents(topics: &[(&[&str], &[&str], &[&str])], docs: usize, per_doc: usize, seed: u64) -> Vec<String> {
    let mut rng = RngStream::new(seed);
    (0..docs)
        .map(|d| {
            let topic = &topics[d % topics.len()];
            (0..per_doc).map(|_| sentence(topic, &mut rng)).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

pub fn unlabeled(docs: Vec<String>) -> UnlabeledCorpus {
    UnlabeledCorpus::new(docs, &Cleaner::new(Stopwords::none()))
}

/// Labeled stories whose effort depends on the topic and sentence length.
pub fn labeled(n: usize, projects: usize, seed: u64) -> LabeledCorpus {
    let mut rng = RngStream::new(seed);
    let efforts = [1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 20.0, 40.0];
    let records = (0..n)
        .map(|i| {
            let t = i % TOPICS.len();
            let extra = rng.below(3);
            let text = (0..=extra).map(|_| sentence(&TOPICS[t], &mut rng)).collect::<Vec<_>>().join(" ");
            RequirementRecord {
                id: format!("P{}-{i}", i % projects),
                project_id: format!("P{}", i % projects),
                text,
                effort: efforts[(t * 2 + extra).min(efforts.len() - 1)],
            }
        })
        .collect();
    LabeledCorpus::new(records).expect("valid synthetic corpus")
}
