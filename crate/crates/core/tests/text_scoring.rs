mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormsift_core::eval::auroc;
use stormsift_core::ingest::{TimeWindow, Timestamp};
use stormsift_core::text::*;

fn params() -> TextModelParams {
    TextModelParams { dimension: 50, ..TextModelParams::default() }
}

#[test]
fn fixed_vector_cases() {
    let alpha = [1.0, 0.0];
    let t1 = [1.0, 0.0];
    let t2 = [0.0, 1.0];
    let taus: [&[f64]; 2] = [&t1, &t2];
    let s = |f| score_vectors(f, &alpha, &taus).unwrap();
    let half_root = 0.5f64.sqrt();
    assert!((s(TextScoreFormula::Mcs) - 0.5).abs() < 1e-12);
    assert!((s(TextScoreFormula::Scssc) - half_root).abs() < 1e-12);
    assert!((s(TextScoreFormula::Dp) - 1.0).abs() < 1e-12);
    assert!((s(TextScoreFormula::Cstvs) - half_root).abs() < 1e-12);

    let only: [&[f64]; 1] = [&alpha];
    assert!((score_vectors(TextScoreFormula::Mcs, &alpha, &only).unwrap() - 1.0).abs() < 1e-12);
    assert!((score_vectors(TextScoreFormula::Cstvs, &alpha, &only).unwrap() - 1.0).abs() < 1e-12);

    let ortho: [&[f64]; 2] = [&[0.0, 2.0], &[0.0, -3.0]];
    assert_eq!(score_vectors(TextScoreFormula::Dp, &alpha, &ortho), Some(0.0));
    assert_eq!(score_vectors(TextScoreFormula::Mcs, &alpha, &ortho), Some(0.0));
    assert_eq!(score_vectors(TextScoreFormula::Mcs, &alpha, &[]), None);
}

fn random_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn scssc_is_mcs_times_root_n_on_random_tweets() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let alpha = random_vectors(&mut rng, 1, 20).remove(0);
        let taus = random_vectors(&mut rng, n, 20);
        let refs: Vec<&[f64]> = taus.iter().map(Vec::as_slice).collect();
        let mcs = score_vectors(TextScoreFormula::Mcs, &alpha, &refs).unwrap();
        let scssc = score_vectors(TextScoreFormula::Scssc, &alpha, &refs).unwrap();
        assert!((scssc - mcs * (n as f64).sqrt()).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn cosine_formulas_ignore_vector_scale(
        seed in any::<u64>(),
        n in 1usize..10,
        scales in prop::collection::vec(0.1..10.0f64, 10),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = random_vectors(&mut rng, 1, 8).remove(0);
        let taus = random_vectors(&mut rng, n, 8);
        let scaled: Vec<Vec<f64>> = taus.iter().zip(&scales).map(|(t, s)| t.iter().map(|x| x * s).collect()).collect();
        let a: Vec<&[f64]> = taus.iter().map(Vec::as_slice).collect();
        let b: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
        for f in [TextScoreFormula::Mcs, TextScoreFormula::Scssc] {
            let (x, y) = (score_vectors(f, &alpha, &a).unwrap(), score_vectors(f, &alpha, &b).unwrap());
            prop_assert!((x - y).abs() < 1e-9);
        }
        let dp = score_vectors(TextScoreFormula::Dp, &alpha, &a).unwrap();
        let doubled: Vec<Vec<f64>> = taus.iter().map(|t| t.iter().map(|x| 2.0 * x).collect()).collect();
        let d: Vec<&[f64]> = doubled.iter().map(Vec::as_slice).collect();
        prop_assert!((score_vectors(TextScoreFormula::Dp, &alpha, &d).unwrap() - 2.0 * dp).abs() < 1e-9);
    }

    #[test]
    fn window_scaling_preserves_rank(raw in prop::collection::vec(prop::option::of(-5.0..5.0f64), 1..40)) {
        let scaled = text_score(&raw);
        prop_assert_eq!(scaled.len(), raw.len());
        for (i, a) in raw.iter().enumerate() {
            prop_assert!((0.0..=100.0).contains(&scaled[i]));
            for (j, b) in raw.iter().enumerate() {
                if let (Some(a), Some(b)) = (a, b) {
                    if a < b {
                        prop_assert!(scaled[i] <= scaled[j]);
                    }
                }
            }
        }
    }
}

#[test]
fn window_scaling_conventions() {
    assert_eq!(text_score(&[Some(1.0), Some(3.0), Some(2.0)]), vec![0.0, 100.0, 50.0]);
    assert_eq!(text_score(&[Some(4.0)]), vec![50.0]);
    assert_eq!(text_score(&[Some(1.0), None, Some(2.0)]), vec![0.0, 0.0, 100.0]);
    assert_eq!(text_score(&[None, None]), vec![0.0, 0.0]);
}

#[test]
fn planted_corpus_is_separated_by_every_formula() {
    let corpus = common::planted_text_corpus(1000, 0.3, 24, 7);
    let tweets: Vec<TokenizedTweet> = corpus.iter().map(|(t, _)| t.clone()).collect();
    let labels: Vec<bool> = corpus.iter().map(|(_, l)| *l).collect();
    let emb = train_segments(&tweets, &params(), "hurricane", 24).unwrap();
    for f in TextScoreFormula::ALL {
        let a = auroc(&emb.scores(&tweets, f, "hurricane"), &labels).unwrap();
        assert!(a >= 0.9, "{f}: {a}");
    }
}

fn bits(t: &EmbeddingTable) -> Vec<(String, Vec<u64>)> {
    t.iter().map(|(k, v)| (k.to_string(), v.iter().map(|x| x.to_bits()).collect())).collect()
}

#[test]
fn same_seed_gives_bitwise_identical_tables() {
    let corpus: Vec<TokenizedTweet> = common::planted_text_corpus(400, 0.3, 48, 3).into_iter().map(|(t, _)| t).collect();
    let a = train_segments(&corpus, &params(), "hurricane", 24).unwrap();
    let b = train_segments(&corpus, &params(), "hurricane", 24).unwrap();
    assert_eq!(a.tables.len(), 2);
    for (s, t) in &a.tables {
        assert_eq!(bits(t), bits(&b.tables[s]));
    }
    let other = train_segments(&corpus, &TextModelParams { seed: 43, ..params() }, "hurricane", 24).unwrap();
    assert_ne!(bits(&a.tables[&0]), bits(&other.tables[&0]));
}

#[test]
fn segments_are_isolated() {
    let corpus: Vec<TokenizedTweet> = common::planted_text_corpus(600, 0.3, 48, 8).into_iter().map(|(t, _)| t).collect();
    let mut perturbed = corpus.clone();
    for t in perturbed.iter_mut().filter(|t| t.window.index >= 24) {
        t.tokens.push("hurricane".into());
        t.tokens.reverse();
    }
    let a = train_segments(&corpus, &params(), "hurricane", 24).unwrap();
    let b = train_segments(&perturbed, &params(), "hurricane", 24).unwrap();
    let sa = a.scores(&corpus, TextScoreFormula::Dp, "hurricane");
    let sb = b.scores(&perturbed, TextScoreFormula::Dp, "hurricane");
    let first: Vec<usize> = (0..corpus.len()).filter(|&i| corpus[i].window.index < 24).collect();
    assert!(!first.is_empty());
    for i in first {
        assert_eq!(sa[i].to_bits(), sb[i].to_bits());
    }
}

#[test]
fn segment_without_seed_term_scores_zero() {
    let w0 = TimeWindow::from_index(0, Timestamp(0));
    let w1 = TimeWindow::from_index(30, Timestamp(0));
    let tw = |id: &str, toks: &[&str], w| TokenizedTweet {
        tweet_id: id.into(),
        tokens: toks.iter().map(|s| s.to_string()).collect(),
        window: w,
    };
    let corpus = vec![
        tw("a", &["hurricane", "flood"], w0),
        tw("b", &["pizza", "cheese"], w0),
        tw("c", &["game", "score"], w1),
        tw("d", &["movie", "ticket"], w1),
    ];
    let emb = train_segments(&corpus, &params(), "hurricane", 24).unwrap();
    let missing = emb.summaries.iter().find(|s| s.segment == 1).unwrap();
    assert!(!missing.seed_term_present);
    assert!(missing.warning.is_some());
    let scores = emb.scores(&corpus, TextScoreFormula::Mcs, "hurricane");
    assert_eq!(&scores[2..], &[0.0, 0.0]);
}

#[test]
fn planted_synonym_is_nearest_neighbour() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let contexts = ["alpha", "beta", "gamma", "delta"];
    let others = ["red", "green", "blue", "black", "white", "orange", "violet", "brown"];
    let w = TimeWindow::from_index(0, Timestamp(0));
    let corpus: Vec<TokenizedTweet> = (0..1500)
        .map(|i| {
            let tokens: Vec<String> = match i % 3 {
                0 => vec!["storm", contexts[rng.random_range(0..4)], contexts[rng.random_range(0..4)]],
                1 => vec!["gale", contexts[rng.random_range(0..4)], contexts[rng.random_range(0..4)]],
                _ => vec![others[rng.random_range(0..8)], others[rng.random_range(0..8)], others[rng.random_range(0..8)]],
            }
            .into_iter()
            .map(String::from)
            .collect();
            TokenizedTweet { tweet_id: i.to_string(), tokens, window: w }
        })
        .collect();
    let table = train_embeddings(0, &corpus, &TextModelParams { window_size: 2, ..params() }).unwrap();
    let top = top_k_neighbors("storm", &table, 1).unwrap();
    assert_eq!(top[0].0, "gale");
    let all = top_k_neighbors("storm", &table, 1000).unwrap();
    assert_eq!(all.len(), table.len() - 1);
    assert!(all.iter().all(|(t, _)| t != "storm"));
    assert!(top_k_neighbors("tornado", &table, 3).is_err());
}

#[test]
fn table_text_round_trip() {
    let corpus: Vec<TokenizedTweet> = common::planted_text_corpus(200, 0.3, 4, 5).into_iter().map(|(t, _)| t).collect();
    let table = train_embeddings(0, &corpus, &params()).unwrap();
    let mut buf = Vec::new();
    table.write(&mut buf).unwrap();
    let back = EmbeddingTable::read(buf.as_slice()).unwrap();
    assert_eq!(bits(&back), bits(&table));
    assert_eq!(back.params, table.params);
}

#[test]
fn tokenizer_contract() {
    let stop = default_stopwords();
    let toks = clean_tokenize("RT @nws: Flooding on I-95!! #Irma https://t.co/x is the worst", stop);
    assert_eq!(toks, vec!["flooding", "#irma", "worst"]);
}
