mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormsift_core::eval::{auroc, confusion, precision_recall_f1};
use stormsift_core::ingest::{GeoLocation, LocationKind, MediaRef, Timestamp, TweetRecord, UserProfile};
use stormsift_core::user::*;

fn accuracy(m: &TrainedUserModel, x: &[Vec<f64>], y: &[bool]) -> f64 {
    x.iter().zip(y).filter(|(r, &l)| (m.predict_proba(r) >= 0.5) == l).count() as f64 / y.len() as f64
}

fn pick(x: &[Vec<f64>], y: &[bool], idx: &[usize]) -> (Vec<Vec<f64>>, Vec<bool>) {
    (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
}

#[test]
fn xor_needs_a_tree_ensemble() {
    let x4 = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let y4 = vec![false, true, true, false];
    let names = ["a", "b"];
    let hp = Hyperparams { max_depth: Some(2), n_trees: 50, ..Hyperparams::default() };
    let lr4 = TrainedUserModel::train(ClassifierKind::LogisticRegression, &names, &x4, &y4, &hp, 1).unwrap();
    assert!(accuracy(&lr4, &x4, &y4) <= 0.75);

    let (x, y) = common::xor_points();
    let rf = TrainedUserModel::train(ClassifierKind::RandomForest, &names, &x, &y, &hp, 1).unwrap();
    assert_eq!(accuracy(&rf, &x, &y), 1.0);
    let lr = TrainedUserModel::train(ClassifierKind::LogisticRegression, &names, &x, &y, &hp, 1).unwrap();
    assert!(accuracy(&lr, &x, &y) <= 0.75);
}

#[test]
fn banded_generator_favours_the_forest() {
    let (x, y) = common::banded_users(2000, 20, 11);
    assert_eq!(y.iter().filter(|&&v| v).count(), 95);
    let (train, test) = stratified_split(&y, 0.3, 3);
    let (xt, yt) = pick(&x, &y, &train);
    let (xs, ys) = pick(&x, &y, &test);
    let f1 = |kind| {
        let m = TrainedUserModel::train(kind, &FEATURE_NAMES, &xt, &yt, &Hyperparams::default(), 5).unwrap();
        let p: Vec<f64> = xs.iter().map(|r| m.predict_proba(r)).collect();
        (precision_recall_f1(&confusion(&p, &ys, 0.5).unwrap()).f1, auroc(&p, &ys).unwrap(), m)
    };
    let (rf_f1, rf_auc, rf) = f1(ClassifierKind::RandomForest);
    let (lr_f1, _, _) = f1(ClassifierKind::LogisticRegression);
    assert!(rf_auc >= 0.95, "{rf_auc}");
    assert!(rf_f1 > lr_f1, "{rf_f1} vs {lr_f1}");
    let imp = rf.gini_importance().unwrap();
    let top = imp.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(top.0, "followers_count");
}

#[test]
fn determinative_feature_dominates_importance() {
    let (x, y) = common::threshold_users(1400, 4);
    let rf = TrainedUserModel::train(ClassifierKind::RandomForest, &FEATURE_NAMES, &x, &y, &Hyperparams::default(), 5).unwrap();
    let imp = rf.gini_importance().unwrap();
    let total: f64 = imp.iter().map(|(_, v)| v).sum();
    assert!((total - 1.0).abs() <= 1e-9);
    assert!(imp[2].1 >= 0.9, "{:?}", imp[2]);
}

#[test]
fn unused_feature_has_zero_importance() {
    let x: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, 7.0]).collect();
    let y: Vec<bool> = (0..60).map(|i| i >= 30).collect();
    let rf = TrainedUserModel::train(ClassifierKind::RandomForest, &["a", "b"], &x, &y, &Hyperparams::default(), 2).unwrap();
    let imp = rf.gini_importance().unwrap();
    assert_eq!(imp[1].1, 0.0);
    assert_eq!(imp[0].1, 1.0);
}

#[test]
fn separable_blobs_all_kinds_rank_well() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..400 {
        let pos = i % 2 == 0;
        let c = if pos { 2.0 } else { -2.0 };
        x.push(vec![c + rng.random_range(-1.5..1.5), c + rng.random_range(-1.5..1.5)]);
        y.push(pos);
    }
    let (train, test) = stratified_split(&y, 0.3, 1);
    let (xt, yt) = pick(&x, &y, &train);
    let (xs, ys) = pick(&x, &y, &test);
    for kind in ClassifierKind::ALL {
        let m = TrainedUserModel::train(kind, &["a", "b"], &xt, &yt, &Hyperparams::default(), 3).unwrap();
        let p: Vec<f64> = xs.iter().map(|r| m.predict_proba(r)).collect();
        assert!(auroc(&p, &ys).unwrap() >= 0.95, "{kind}");
    }
}

#[test]
fn shuffled_labels_score_near_chance() {
    let (x, mut y) = common::banded_users(600, 1, 8);
    y.shuffle(&mut ChaCha8Rng::seed_from_u64(6));
    let hp = Hyperparams { n_trees: 30, ..Hyperparams::default() };
    let r = cross_validate(ClassifierKind::RandomForest, &FEATURE_NAMES, &x, &y, &hp, 4).unwrap();
    assert_eq!(r.repeats.len(), 10);
    assert!((0.4..=0.6).contains(&r.auroc.mean), "{}", r.auroc.mean);
}

#[test]
fn grid_search_picks_deep_enough_trees_for_xor() {
    let (x, y) = common::xor_points();
    let grid = GridSpec::new().axis("max_depth", [1, 2, 4]);
    let base = Hyperparams { n_trees: 20, ..Hyperparams::default() };
    let g = grid_search(ClassifierKind::RandomForest, &["a", "b"], &x, &y, &grid, &base, 9).unwrap();
    assert!(g.best_params().max_depth.unwrap() >= 2);
    let again = grid_search(ClassifierKind::RandomForest, &["a", "b"], &x, &y, &grid, &base, 9).unwrap();
    assert_eq!(g, again);
    let one = GridSpec::new().axis("n_trees", [5]);
    assert_eq!(grid_search(ClassifierKind::RandomForest, &["a", "b"], &x, &y, &one, &base, 9).unwrap().best, 0);
}

#[test]
fn single_tree_forest_returns_leaf_ratio() {
    let (x, y) = common::xor_points();
    let hp = Hyperparams { n_trees: 1, max_depth: Some(1), ..Hyperparams::default() };
    let m = TrainedUserModel::train(ClassifierKind::RandomForest, &["a", "b"], &x, &y, &hp, 3).unwrap();
    let t = &m.trees().unwrap()[0];
    for r in &x {
        assert_eq!(m.predict_proba(r), t.predict(r));
    }
}

#[test]
fn training_is_deterministic_and_round_trips() {
    let (x, y) = common::banded_users(300, 5, 2);
    for kind in ClassifierKind::ALL {
        let hp = Hyperparams { n_trees: 15, ..Hyperparams::default() };
        let a = TrainedUserModel::train(kind, &FEATURE_NAMES, &x, &y, &hp, 7).unwrap();
        let b = TrainedUserModel::train(kind, &FEATURE_NAMES, &x, &y, &hp, 7).unwrap();
        assert_eq!(a, b);
        let back = TrainedUserModel::from_text(&a.to_text()).unwrap();
        for r in &x {
            assert_eq!(back.predict_proba(r).to_bits(), a.predict_proba(r).to_bits());
        }
    }
}

#[test]
fn user_score_spans_calibration() {
    let (x, y) = common::banded_users(300, 5, 2);
    let m = TrainedUserModel::train(ClassifierKind::GradientBoosted, &FEATURE_NAMES, &x, &y, &Hyperparams::default(), 1).unwrap();
    let scores: Vec<f64> = x.iter().map(|r| m.user_score(r)).collect();
    assert_eq!(scores.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(scores.iter().copied().fold(f64::NEG_INFINITY, f64::max), 100.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn probabilities_and_scores_stay_in_range(seed in any::<u64>(), probe in prop::collection::vec(-1e7..1e7f64, 9)) {
        let (x, y) = common::banded_users(120, 3, seed);
        for kind in ClassifierKind::ALL {
            let hp = Hyperparams { n_trees: 5, max_iter: 200, ..Hyperparams::default() };
            let m = TrainedUserModel::train(kind, &FEATURE_NAMES, &x, &y, &hp, seed).unwrap();
            let p = m.predict_proba(&probe);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((0.0..=100.0).contains(&m.user_score(&probe)));
        }
    }
}

fn tweet(id: &str, user: &UserProfile, created: i64, links: bool, media: bool, kind: LocationKind) -> TweetRecord {
    TweetRecord {
        id: id.into(),
        created_at: Timestamp(created),
        text: "x".into(),
        location: GeoLocation { lat: 27.0, lon: -82.0 },
        location_kind: kind,
        hashtags: vec!["irma".into()],
        weblinks: if links { vec!["https://x".into()] } else { vec![] },
        media: if media { vec![MediaRef { media_id: "m".into(), path: "m.png".into() }] } else { vec![] },
        author: user.clone(),
    }
}

#[test]
fn feature_extraction_examples() {
    let day = 86_400;
    let user = UserProfile {
        user_id: "u".into(),
        account_created_at: Timestamp(0),
        friends_count: 3,
        followers_count: 4,
        statuses_count: 50,
        verified: false,
    };
    let t1 = tweet("1", &user, 10, true, false, LocationKind::PlaceCentroid);
    let t2 = tweet("2", &user, 20, false, false, LocationKind::Coordinates);
    let f = extract_user_features(&[&t1, &t2], Timestamp(100 * day)).unwrap();
    assert_eq!(f.message_frequency, 0.5);
    assert!(f.has_weblinks && !f.has_media && f.is_geolocated);
    assert_eq!(f.hashtag_count, 2);

    let young = extract_user_features(&[&t1], Timestamp(0)).unwrap();
    assert_eq!(young.account_age_days, 0.0);
    assert_eq!(young.message_frequency, 50.0);
    assert!(matches!(extract_user_features(&[], Timestamp(0)), Err(UserError::NoTweets)));
}
