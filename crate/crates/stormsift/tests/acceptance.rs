//! Acceptance gate. Prints one PASS or FAIL line per criterion.
//!
//! Exits 0 unless `STORMSIFT_ACCEPTANCE_STRICT=1`, in which case any FAIL
//! makes the process exit nonzero.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::Request;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormsift::api::{router, AppState, TweetsResponse};
use stormsift::commands::{execute, Cli};
use stormsift::mapctx::MockMapProvider;
use stormsift::pipeline::read_manifest;
use stormsift::snapshot::{Store, StoreSnapshot};
use stormsift_core::eval::{auroc, cohen_kappa, confusion, light_kappa, precision_recall_f1};
use stormsift_core::fusion::*;
use stormsift_core::geo::*;
use stormsift_core::ingest::GeoLocation;
use stormsift_core::text::*;
use stormsift_core::user::*;
use tower::ServiceExt;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn idw_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2017);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let stations: Vec<((f64, f64), f64)> = (0..n)
            .map(|_| ((rng.random_range(24.0..31.0), rng.random_range(-88.0..-79.0)), rng.random_range(0.0..120.0)))
            .collect();
        let p = (rng.random_range(24.0..31.0), rng.random_range(-88.0..-79.0));
        let readings: Vec<(GeoLocation, f64)> =
            stations.iter().map(|&((lat, lon), v)| (GeoLocation { lat, lon }, v)).collect();
        let got = idw_interpolate(GeoLocation { lat: p.0, lon: p.1 }, &readings, 2.0).map_err(|e| e.to_string())?;
        let want = common::idw_reference(p, &stations, 2.0);
        worst = worst.max((got - want).abs());
        check!((got - want).abs() <= 1e-9, "idw {got} vs reference {want}");
        let lo = stations.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let hi = stations.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        check!(got >= lo && got <= hi, "idw {got} outside [{lo}, {hi}]");
    }
    Ok(format!("100 fixtures, max |diff| {worst:.1e}"))
}

fn geo_selection() -> Outcome {
    let samples = common::synthetic_storm(3000, 5);
    let products: Vec<f64> = samples.iter().map(|(g, _)| g.wind * g.rain).collect();
    let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    check!(hi / lo >= 1e4, "w*r spans only {:.1} decades", (hi / lo).log10());

    let sel = select_geo_model(&samples, &GeoParams::default()).map_err(|e| e.to_string())?;
    let rank_of = |keep: &dyn Fn(TransformKind) -> bool| -> Vec<usize> {
        sel.candidates.iter().filter(|c| keep(c.transform)).filter_map(|c| c.rank).collect()
    };
    let worst_normalized = rank_of(&|t| t != TransformKind::MinMax).into_iter().max().ok_or("no ranked candidates")?;
    let best_raw = rank_of(&|t| t == TransformKind::MinMax).into_iter().min().ok_or("no ranked MinMax candidates")?;
    check!(worst_normalized < best_raw, "a normalized variant ranks {worst_normalized}, a MinMax one {best_raw}");

    let xs = common::lognormal(500, 0.0, 1.0, 77);
    let raw = shapiro_wilk(&xs).map_err(|e| e.to_string())?;
    let logged = shapiro_wilk(&transform_log10(&xs, DEFAULT_EPSILON)).map_err(|e| e.to_string())?;
    check!(logged >= raw + 0.05, "log W {logged:.4} vs raw W {raw:.4}");
    Ok(format!(
        "span {:.1} decades, normalized ranks <= {worst_normalized} < MinMax {best_raw}, W log {logged:.4} raw {raw:.4}",
        (hi / lo).log10()
    ))
}

fn boxcox_recovery() -> Outcome {
    let xs = common::lognormal(5000, 0.5, 0.8, 31);
    let fitted = fit_boxcox_lambda(&xs, DEFAULT_EPSILON).map_err(|e| e.to_string())?;
    let grid = common::boxcox_grid_lambda(&xs, -5.0, 5.0, 0.01);
    check!(fitted.abs() <= 0.15, "lambda {fitted:.4} not within 0.15 of 0");
    check!(grid.abs() <= 0.15, "grid lambda {grid:.4} not within 0.15 of 0");
    check!((fitted - grid).abs() <= 0.011, "lambda {fitted:.4} vs grid {grid:.2}");
    Ok(format!("lambda {fitted:.4}, grid {grid:.2}"))
}

fn shapiro_reference() -> Outcome {
    let mut worst: f64 = 0.0;
    for (dist, n, seed, want) in common::SHAPIRO_REFERENCE {
        let got = shapiro_wilk(&common::sample(dist, n, seed)).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs());
        check!((got - want).abs() < 1e-3, "{dist:?} n={n}: W {got:.6} vs {want:.6}");
    }
    Ok(format!("10 samples, max |diff| {worst:.1e}"))
}

fn text_formulas() -> Outcome {
    let alpha = [1.0, 0.0];
    let taus: [&[f64]; 2] = [&[1.0, 0.0], &[0.0, 1.0]];
    let half_root = 0.5f64.sqrt();
    for (f, want) in [
        (TextScoreFormula::Mcs, 0.5),
        (TextScoreFormula::Scssc, half_root),
        (TextScoreFormula::Dp, 1.0),
        (TextScoreFormula::Cstvs, half_root),
    ] {
        let got = score_vectors(f, &alpha, &taus).ok_or("no score")?;
        check!((got - want).abs() < 1e-12, "{f}: {got} vs {want}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let alpha: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let taus: Vec<Vec<f64>> = (0..n).map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = taus.iter().map(Vec::as_slice).collect();
        let mcs = score_vectors(TextScoreFormula::Mcs, &alpha, &refs).ok_or("no score")?;
        let scssc = score_vectors(TextScoreFormula::Scssc, &alpha, &refs).ok_or("no score")?;
        check!((scssc - mcs * (n as f64).sqrt()).abs() < 1e-12, "SCSSC {scssc} vs MCS*sqrt(n) {}", mcs * (n as f64).sqrt());
    }

    let corpus = common::planted_text_corpus(1000, 0.3, 24, 7);
    let tweets: Vec<TokenizedTweet> = corpus.iter().map(|(t, _)| t.clone()).collect();
    let labels: Vec<bool> = corpus.iter().map(|(_, l)| *l).collect();
    let params = TextModelParams { dimension: 50, ..TextModelParams::default() };
    let emb = train_segments(&tweets, &params, "hurricane", 24).map_err(|e| e.to_string())?;
    let mut aucs = Vec::new();
    for f in TextScoreFormula::ALL {
        let a = auroc(&emb.scores(&tweets, f, "hurricane"), &labels).map_err(|e| e.to_string())?;
        aucs.push((f, a));
    }
    let summary = aucs.iter().map(|(f, a)| format!("{f} {a:.4}")).collect::<Vec<_>>().join(", ");
    check!(aucs.iter().all(|(_, a)| *a >= 0.9), "AUROC below 0.9: {summary}");
    let of = |f| aucs.iter().find(|(g, _)| *g == f).map(|(_, a)| *a).unwrap_or(f64::NAN);
    check!(
        of(TextScoreFormula::Dp) >= of(TextScoreFormula::Mcs),
        "DP >= MCS ordering not reproduced: {summary}"
    );
    Ok(summary)
}

fn embedding_determinism() -> Outcome {
    let corpus: Vec<TokenizedTweet> = common::planted_text_corpus(400, 0.3, 48, 3).into_iter().map(|(t, _)| t).collect();
    let params = TextModelParams { dimension: 50, ..TextModelParams::default() };
    let a = train_segments(&corpus, &params, "hurricane", 24).map_err(|e| e.to_string())?;
    let b = train_segments(&corpus, &params, "hurricane", 24).map_err(|e| e.to_string())?;
    let bits = |t: &EmbeddingTable| -> Vec<(String, Vec<u64>)> {
        t.iter().map(|(k, v)| (k.to_string(), v.iter().map(|x| x.to_bits()).collect())).collect()
    };
    check!(a.tables.len() == b.tables.len(), "segment counts differ");
    let mut words = 0;
    for (s, t) in &a.tables {
        let other = b.tables.get(s).ok_or("segment missing from second run")?;
        check!(bits(t) == bits(other), "segment {s} differs");
        words += t.iter().count();
    }
    Ok(format!("{} segments, {words} vectors identical", a.tables.len()))
}

fn user_classifiers() -> Outcome {
    let accuracy = |m: &TrainedUserModel, x: &[Vec<f64>], y: &[bool]| {
        x.iter().zip(y).filter(|(r, &l)| (m.predict_proba(r) >= 0.5) == l).count() as f64 / y.len() as f64
    };
    let hp = Hyperparams { max_depth: Some(2), n_trees: 50, ..Hyperparams::default() };
    let (x, y) = common::xor_points();
    let rf = TrainedUserModel::train(ClassifierKind::RandomForest, &["a", "b"], &x, &y, &hp, 1).map_err(|e| e.to_string())?;
    let lr = TrainedUserModel::train(ClassifierKind::LogisticRegression, &["a", "b"], &x, &y, &hp, 1).map_err(|e| e.to_string())?;
    let (rf_xor, lr_xor) = (accuracy(&rf, &x, &y), accuracy(&lr, &x, &y));
    check!(rf_xor == 1.0, "XOR RF train accuracy {rf_xor}");
    check!(lr_xor <= 0.75, "XOR LR train accuracy {lr_xor}");

    let (x, y) = common::banded_users(2000, 20, 11);
    let (train, test) = stratified_split(&y, 0.3, 3);
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
        (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
    };
    let (xt, yt) = pick(&train);
    let (xs, ys) = pick(&test);
    let fit = |kind| -> Result<(f64, f64, TrainedUserModel), String> {
        let m = TrainedUserModel::train(kind, &FEATURE_NAMES, &xt, &yt, &Hyperparams::default(), 5).map_err(|e| e.to_string())?;
        let p: Vec<f64> = xs.iter().map(|r| m.predict_proba(r)).collect();
        let f1 = precision_recall_f1(&confusion(&p, &ys, 0.5).map_err(|e| e.to_string())?).f1;
        Ok((f1, auroc(&p, &ys).map_err(|e| e.to_string())?, m))
    };
    let (rf_f1, rf_auc, rf) = fit(ClassifierKind::RandomForest)?;
    let (lr_f1, _, _) = fit(ClassifierKind::LogisticRegression)?;
    check!(rf_auc >= 0.95, "RF test AUROC {rf_auc:.4}");
    check!(rf_f1 > lr_f1, "RF F1 {rf_f1:.4} vs LR F1 {lr_f1:.4}");
    let imp = rf.gini_importance().map_err(|e| e.to_string())?;
    let total: f64 = imp.iter().map(|(_, v)| v).sum();
    check!((total - 1.0).abs() <= 1e-9, "banded importances sum to {total}");

    let (x, y) = common::threshold_users(1400, 4);
    let rf_t = TrainedUserModel::train(ClassifierKind::RandomForest, &FEATURE_NAMES, &x, &y, &Hyperparams::default(), 5)
        .map_err(|e| e.to_string())?;
    let imp_t = rf_t.gini_importance().map_err(|e| e.to_string())?;
    let total_t: f64 = imp_t.iter().map(|(_, v)| v).sum();
    check!((total_t - 1.0).abs() <= 1e-9, "importances sum to {total_t}");
    check!(imp_t[2].0 == "followers_count" && imp_t[2].1 >= 0.9, "followers importance {:?}", imp_t[2]);
    Ok(format!(
        "XOR RF {rf_xor} LR {lr_xor}; RF AUROC {rf_auc:.4}, F1 RF {rf_f1:.4} > LR {lr_f1:.4}; followers importance {:.4}",
        imp_t[2].1
    ))
}

fn auroc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < 200 {
        let n = rng.random_range(2..=20);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u8)) / 2.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if !(labels.contains(&true) && labels.contains(&false)) {
            continue;
        }
        let got = auroc(&scores, &labels).map_err(|e| e.to_string())?;
        let want = common::auroc_pairs(&scores, &labels);
        worst = worst.max((got - want).abs());
        check!((got - want).abs() <= 1e-12, "AUROC {got} vs pairs {want}");
        done += 1;
    }
    Ok(format!("200 sets, max |diff| {worst:.1e}"))
}

fn fusion_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let draw = |rng: &mut ChaCha8Rng| {
        if rng.random::<f64>() < 0.1 {
            f64::from(rng.random_range(0..=10u8)) * 10.0
        } else {
            rng.random_range(0.0..=100.0)
        }
    };
    let vectors: Vec<ScoreVector> = (0..10_000)
        .map(|_| {
            let no_media = rng.random::<f64>() < 0.3;
            let (g, t, u) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let i = if no_media { 0.0 } else { draw(&mut rng) };
            ScoreVector::new(g, t, u, i).expect("in range")
        })
        .collect();
    let all: Vec<ScoredTweet> = vectors
        .iter()
        .enumerate()
        .map(|(i, s)| ScoredTweet::new(common::dummy_tweet(&i.to_string(), i as i64), *s, None, &ThresholdVector::default()))
        .collect();
    let image_gate = ThresholdVector { image_min: 1.0, ..ThresholdVector::default() };
    for s in &vectors {
        let at = ThresholdVector::new(s.geo, s.text, s.user, s.image).map_err(|e| e.to_string())?;
        check!(passes_thresholds(s, &at), "{s:?} fails at its own thresholds");
        check!(s.image != 0.0 || !passes_thresholds(s, &image_gate), "{s:?} passes image_min 1 without media");
    }
    let random_t = |rng: &mut ChaCha8Rng| {
        ThresholdVector::new(
            rng.random_range(0.0..=100.0),
            rng.random_range(0.0..=100.0),
            rng.random_range(0.0..=100.0),
            rng.random_range(0.0..=100.0),
        )
        .expect("in range")
    };
    for _ in 0..50 {
        let t = random_t(&mut rng);
        let mut tighter = t;
        tighter.geo_min = rng.random_range(t.geo_min..=100.0);
        tighter.text_min = rng.random_range(t.text_min..=100.0);
        tighter.user_min = rng.random_range(t.user_min..=100.0);
        tighter.image_min = rng.random_range(t.image_min..=100.0);
        let base = filter_stream(&all, &t);
        let base_ids: HashSet<&str> = base.iter().map(|s| s.tweet.id.as_str()).collect();
        check!(
            filter_stream(&all, &tighter).iter().all(|s| base_ids.contains(s.tweet.id.as_str())),
            "raising thresholds admitted a new message"
        );
        check!(filter_stream(&base, &t) == base, "filter is not idempotent");
        let oracle = vectors
            .iter()
            .filter(|s| s.geo >= t.geo_min && s.text >= t.text_min && s.user >= t.user_min && s.image >= t.image_min)
            .count();
        check!(base.len() == oracle, "filter kept {} of {oracle}", base.len());
    }
    for axis in Axis::ALL {
        let cdf = cdf_pass_rate(&vectors, axis, &default_thresholds()).map_err(|e| e.to_string())?;
        check!(cdf.windows(2).all(|w| w[1].1 <= w[0].1), "{axis:?} CDF increases");
    }
    Ok("10000 vectors, 50 threshold pairs, 4 CDF axes".into())
}

fn cli(args: &[&str]) -> Result<String, String> {
    use clap::Parser;
    let parsed = Cli::try_parse_from(std::iter::once("stormsift").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    execute(&parsed, &mut out).map_err(|e| format!("{e:#}"))?;
    String::from_utf8(out).map_err(|e| e.to_string())
}

fn end_to_end() -> Outcome {
    let mut digests = Vec::new();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (files, _) = support::scenario(dir.path(), 42);
        let conf = files.config.to_str().ok_or("non-UTF-8 path")?;
        let steps: [&[&str]; 7] = [
            &["-c", conf, "ingest"],
            &["-c", conf, "select-geo"],
            &["-c", conf, "train-text"],
            &["-c", conf, "train-user"],
            &["-c", conf, "score"],
            &["-c", conf, "filter", "--geo", "50", "--text", "30", "--user", "85", "--image", "85"],
            &["-c", conf, "report", "--cdf"],
        ];
        let mut transcript = String::new();
        for step in steps {
            let out = cli(step)?;
            if step[2] == "filter" || step[2] == "report" {
                transcript.push_str(&out);
            }
        }
        let manifest = read_manifest(&dir.path().join("work/manifest.json")).map_err(|e| e.to_string())?;
        check!(manifest.counts.scored == 1000, "scored {} messages", manifest.counts.scored);
        digests.push(manifest.digest());
        outputs.push(transcript);
    }
    check!(digests[0] == digests[1], "manifest digests differ: {} vs {}", digests[0], digests[1]);
    check!(outputs[0] == outputs[1], "filter or report output differs between runs");
    Ok(format!("manifest {}", &digests[0][..16]))
}

fn api_equivalence() -> Outcome {
    let (_dir, cfg, run) = support::scenario_run(42);
    let oracle: Vec<String> =
        filter_stream(run.snapshot.tweets(), &ThresholdVector::RECOMMENDED).into_iter().map(|s| s.tweet.id).collect();
    let snapshot: StoreSnapshot = run.snapshot;
    let state = AppState {
        store: Arc::new(Store::new(snapshot)),
        config: Arc::new(cfg),
        provider: Arc::new(MockMapProvider::default()),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let got = rt.block_on(async {
        let mut ids = Vec::new();
        let mut total = 0;
        for page in 0.. {
            let uri = format!("/tweets?geo_min=50&text_min=30&user_min=85&image_min=85&page={page}&page_size=10");
            let resp = router(state.clone())
                .oneshot(Request::get(uri).body(Body::empty()).map_err(|e| e.to_string())?)
                .await
                .map_err(|e| e.to_string())?;
            check!(resp.status().is_success(), "status {}", resp.status());
            let bytes = to_bytes(resp.into_body(), usize::MAX).await.map_err(|e| e.to_string())?;
            let r: TweetsResponse = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
            total = r.total;
            if r.records.is_empty() {
                break;
            }
            ids.extend(r.records.into_iter().map(|x| x.id));
        }
        Ok::<_, String>((total, ids))
    })?;
    check!(!oracle.is_empty(), "preset passes nothing");
    check!(got.1 == oracle, "API returned {} ids, in-process filter {}", got.1.len(), oracle.len());
    check!(got.0 == oracle.len(), "API total {} vs {}", got.0, oracle.len());
    Ok(format!("{} messages pass (50, 30, 85, 85)", oracle.len()))
}

fn kappa() -> Outcome {
    let a = ["related", "not", "related", "not", "related"];
    let identical = cohen_kappa(&a, &a).map_err(|e| e.to_string())?;
    check!(identical == 1.0, "identical raters kappa {identical}");
    let many = light_kappa(&[a.to_vec(), a.to_vec(), a.to_vec()]).map_err(|e| e.to_string())?;
    check!(many == 1.0, "identical rater panel kappa {many}");
    // observed agreement 1/2, chance agreement 1 * 1/2 + 0 * 1/2 = 1/2
    let zero = cohen_kappa(&[1, 1, 1, 1], &[1, 0, 1, 0]).map_err(|e| e.to_string())?;
    check!(zero.abs() <= 1e-12, "zero fixture kappa {zero}");
    Ok(format!("identical {identical}, zero fixture {zero:e}"))
}

fn main() {
    let criteria = [
        Criterion { name: "IDW oracle equivalence", budget: Some(Duration::from_secs(1)), run: idw_oracle },
        Criterion { name: "Geospatial selection property", budget: Some(Duration::from_secs(30)), run: geo_selection },
        Criterion { name: "Box-Cox lambda recovery", budget: Some(Duration::from_secs(5)), run: boxcox_recovery },
        Criterion { name: "Shapiro-Wilk reference values", budget: None, run: shapiro_reference },
        Criterion { name: "Text formulas", budget: Some(Duration::from_secs(60)), run: text_formulas },
        Criterion { name: "Embedding determinism", budget: None, run: embedding_determinism },
        Criterion { name: "User classifiers", budget: Some(Duration::from_secs(60)), run: user_classifiers },
        Criterion { name: "AUROC oracle equivalence", budget: None, run: auroc_oracle },
        Criterion { name: "Fusion semantics", budget: None, run: fusion_semantics },
        Criterion { name: "End-to-end determinism", budget: Some(Duration::from_secs(60)), run: end_to_end },
        Criterion { name: "API/oracle equivalence", budget: None, run: api_equivalence },
        Criterion { name: "Kappa", budget: None, run: kappa },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:.0?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {}  ({detail}; {elapsed:.2?})", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}  ({why}; {elapsed:.2?})", c.name);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var("STORMSIFT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
