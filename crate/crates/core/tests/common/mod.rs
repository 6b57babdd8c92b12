#![allow(dead_code)]

use std::collections::HashSet;

use wme_core::corpus::{RawRecord, TokenizedDataset};
use wme_core::{Corpus, EmbeddingTable, WeightScheme};
use wme_testkit::{clustered_documents, ClusteredVocabulary};

/// Two-class corpus over a two-cluster vocabulary.
pub fn clustered_corpus(seed: u64, per_class: usize, mean_len: usize, noise: f64) -> (EmbeddingTable, Corpus) {
    let vocab = ClusteredVocabulary::generate(seed, 8, 2, 30, 3.0, 1.0);
    let table = EmbeddingTable::new(vocab.dim, vocab.entries.clone()).unwrap();
    let records: Vec<RawRecord> = clustered_documents(&vocab, seed + 1, per_class, mean_len, noise)
        .into_iter()
        .map(|(label, text)| RawRecord { label, text })
        .collect();
    let dataset = TokenizedDataset::from_records(&records, &HashSet::new(), 1);
    let names = dataset.label_names();
    let corpus = Corpus::build(&dataset, None, &table, &WeightScheme::Nbow, &names).unwrap();
    (table, corpus)
}
