use std::collections::HashSet;
use std::io::Cursor;

use proptest::prelude::*;
use wme_core::corpus::tokenize;
use wme_core::{EmbeddingTable, Error};
use wme_testkit as tk;

fn entries() -> impl Strategy<Value = (usize, Vec<(String, Vec<f32>)>)> {
    (1usize..6).prop_flat_map(|dim| {
        let entry = ("[a-z0-9_]{1,8}", prop::collection::vec(-1e6f32..1e6, dim));
        (Just(dim), prop::collection::vec(entry, 1..12))
    })
}

fn dedup(entries: Vec<(String, Vec<f32>)>) -> Vec<(String, Vec<f32>)> {
    let mut seen = HashSet::new();
    entries.into_iter().filter(|(t, _)| seen.insert(t.clone())).collect()
}

proptest! {
    #[test]
    fn binary_round_trip((dim, raw) in entries()) {
        let entries = dedup(raw);
        let table = EmbeddingTable::new(dim, entries.clone()).unwrap();
        let mut buf = Vec::new();
        table.write_word2vec_binary(&mut buf).unwrap();
        prop_assert_eq!(&buf, &tk::word2vec_binary_bytes(dim, &entries));
        let back = EmbeddingTable::read_word2vec_binary(&mut Cursor::new(buf)).unwrap();
        prop_assert_eq!(back.fingerprint(), table.fingerprint());
        for (t, v) in &entries {
            prop_assert_eq!(back.lookup(t).unwrap(), v.as_slice());
        }
    }

    #[test]
    fn text_round_trip((dim, raw) in entries()) {
        let table = EmbeddingTable::new(dim, dedup(raw)).unwrap();
        let mut buf = Vec::new();
        table.write_text(&mut buf).unwrap();
        let back = EmbeddingTable::read_text(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back.fingerprint(), table.fingerprint());
    }

    #[test]
    fn truncation_is_reported(cut in 2usize..30) {
        let entries = tk::random_vocabulary(1, 3, 2);
        let bytes = tk::word2vec_binary_bytes(2, &entries);
        // The final newline is optional, so cuts start at the last vector byte.
        let cut = cut.min(bytes.len() - 2);
        let result = EmbeddingTable::read_word2vec_binary(&mut Cursor::new(&bytes[..bytes.len() - cut]));
        prop_assert!(result.is_err());
    }

    #[test]
    fn tokenizer_matches_reference(text in "[ A-Za-z0-9,.!?'-]{0,60}") {
        let stop: HashSet<String> = ["the", "a", "of"].iter().map(|s| s.to_string()).collect();
        prop_assert_eq!(tokenize(&text, &stop), tk::reference_tokenize(&text, &["the", "a", "of"]));
    }
}

#[test]
fn unit_normalized_rows_have_unit_norm() {
    let table = EmbeddingTable::new(4, tk::random_vocabulary(2, 10, 4)).unwrap();
    let unit = table.unit_normalized();
    for (_, v) in unit.iter() {
        let norm: f64 = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }
}

#[test]
fn loading_missing_file_names_the_path() {
    let err = EmbeddingTable::load_word2vec_binary("/nonexistent/vectors.bin").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/vectors.bin"));
}
