//! Seeded synthetic hurricane scenario: a storm crossing Florida over 72
//! hours, ten weather stations, and a message stream in which related
//! messages cluster near the eye and use storm vocabulary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use stormsift_core::geo::haversine_miles;
use stormsift_core::ingest::{GeoLocation, Timestamp, WINDOW_SECONDS};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub tweets: usize,
    pub stations: usize,
    pub hours: u32,
    pub authors: usize,
    pub seed: u64,
    /// Extra malformed or out-of-window lines appended to the stream.
    pub bad_lines: usize,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec { tweets: 1000, stations: 10, hours: 72, authors: 250, seed: 42, bad_lines: 3 }
    }
}

pub const STUDY_START: Timestamp = Timestamp(1_505_001_600);

const STORM_WORDS: [&str; 24] = [
    "storm", "irma", "wind", "winds", "flooding", "flood", "surge", "evacuate", "evacuation", "shelter", "power",
    "outage", "rain", "damage", "trees", "gusts", "category", "landfall", "eye", "water", "roof", "debris", "outer",
    "bands",
];
const DAILY_WORDS: [&str; 24] = [
    "coffee", "game", "lunch", "music", "movie", "friends", "traffic", "work", "school", "dinner", "weekend",
    "birthday", "gym", "shopping", "pizza", "concert", "football", "dog", "sunset", "tacos", "brunch", "studying",
    "playlist", "vacation",
];

#[derive(Debug, Clone)]
pub struct ScenarioFiles {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub tweets: PathBuf,
    pub sensors: PathBuf,
    pub track: PathBuf,
    pub labels: PathBuf,
    pub image_scores: PathBuf,
}

fn eye_at(hour: u32, hours: u32) -> (GeoLocation, f64) {
    let f = f64::from(hour) / f64::from(hours.max(2) - 1);
    let eye = GeoLocation { lat: 24.6 + 6.4 * f, lon: -81.6 - 1.4 * f };
    (eye, 130.0 - 80.0 * f)
}

fn category(max_wind: f64) -> u8 {
    match max_wind {
        w if w >= 157.0 => 5,
        w if w >= 130.0 => 4,
        w if w >= 111.0 => 3,
        w if w >= 96.0 => 2,
        w if w >= 74.0 => 1,
        _ => 0,
    }
}

fn words(rng: &mut ChaCha8Rng, pool: &[&str], count: std::ops::Range<usize>) -> Vec<String> {
    let n = rng.random_range(count);
    (0..n).map(|_| pool.choose(rng).expect("non-empty").to_string()).collect()
}

/// Writes the scenario inputs and a config file into `dir`.
pub fn generate_scenario(dir: &Path, spec: &ScenarioSpec) -> std::io::Result<ScenarioFiles> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let iso = |secs: i64| Timestamp(secs).to_iso();

    let mut track = String::from("window_start_iso,lat,lon,category,pressure_mb,max_wind_mph\n");
    for h in 0..spec.hours {
        let (eye, vmax) = eye_at(h, spec.hours);
        let _ = writeln!(
            track,
            "{},{:.4},{:.4},{},{:.1},{:.1}",
            iso(STUDY_START.0 + i64::from(h) * WINDOW_SECONDS),
            eye.lat,
            eye.lon,
            category(vmax),
            930.0 + (130.0 - vmax) * 0.75,
            vmax
        );
    }

    let stations: Vec<GeoLocation> = (0..spec.stations)
        .map(|_| GeoLocation { lat: rng.random_range(25.0..30.8), lon: rng.random_range(-82.8..-80.1) })
        .collect();
    let mut sensors = String::from("station_id,lat,lon,window_start_iso,wind_mph,precip_in\n");
    for h in 0..spec.hours {
        let (eye, vmax) = eye_at(h, spec.hours);
        for (i, s) in stations.iter().enumerate() {
            let d = haversine_miles(*s, eye);
            let wind = vmax * (-d / 90.0).exp() + rng.random_range(0.0..4.0);
            let rain = 3.0 * (-d / 60.0).exp() + rng.random_range(0.0..0.05);
            let _ = writeln!(
                sensors,
                "ST{i:02},{:.4},{:.4},{},{wind:.2},{rain:.3}",
                s.lat,
                s.lon,
                iso(STUDY_START.0 + i64::from(h) * WINDOW_SECONDS)
            );
        }
    }

    struct Author {
        id: String,
        created: i64,
        friends: u64,
        followers: u64,
        statuses: u64,
        verified: bool,
    }
    let authors: Vec<Author> = (0..spec.authors)
        .map(|i| {
            let verified = rng.random_bool(0.08);
            let log_followers = if verified { rng.random_range(3.8..6.0) } else { rng.random_range(0.5..4.2) };
            Author {
                id: format!("u{i:04}"),
                created: STUDY_START.0 - rng.random_range(30..3300) * 86_400,
                friends: 10f64.powf(rng.random_range(1.0..3.5)) as u64,
                followers: 10f64.powf(log_followers) as u64,
                statuses: 10f64.powf(rng.random_range(1.5..5.0)) as u64,
                verified,
            }
        })
        .collect();

    let mut tweets = String::new();
    let mut labels = String::from("subject_id,rater_id,related,tags\n");
    let mut images = String::from("media_id,p_related,p_flood,p_wind,p_destruction\n");
    let span = i64::from(spec.hours) * WINDOW_SECONDS;
    for i in 0..spec.tweets {
        let related = rng.random_bool(0.45);
        let t = STUDY_START.0 + rng.random_range(0..span);
        let hour = ((t - STUDY_START.0) / WINDOW_SECONDS) as u32;
        let (eye, _) = eye_at(hour, spec.hours);
        let loc = if related {
            GeoLocation { lat: eye.lat + rng.random_range(-0.6..0.6), lon: eye.lon + rng.random_range(-0.6..0.6) }
        } else {
            GeoLocation { lat: rng.random_range(25.0..31.0), lon: rng.random_range(-83.0..-80.0) }
        };
        let mut text = if related {
            let mut w = words(&mut rng, &STORM_WORDS, 4..8);
            w.extend(words(&mut rng, &DAILY_WORDS, 0..2));
            if rng.random_bool(0.7) {
                w.insert(rng.random_range(0..w.len()), "hurricane".into());
            }
            w
        } else {
            let mut w = words(&mut rng, &DAILY_WORDS, 4..8);
            if rng.random_bool(0.12) {
                w.push(STORM_WORDS.choose(&mut rng).expect("non-empty").to_string());
            }
            if rng.random_bool(0.03) {
                w.push("hurricane".into());
            }
            w
        };
        let hashtags: Vec<&str> = if related && rng.random_bool(0.4) { vec!["irma"] } else { vec![] };
        for h in &hashtags {
            text.push(format!("#{h}"));
        }
        let author = &authors[rng.random_range(0..authors.len())];
        let id = format!("t{i:05}");
        let has_media = rng.random_bool(0.3);
        let media = if has_media { vec![json!({"id": format!("m{i:05}"), "path": format!("img/m{i:05}.png")})] } else { vec![] };
        let mut record = json!({
            "id": id,
            "created_at": iso(t),
            "text": text.join(" "),
            "hashtags": hashtags,
            "urls": if rng.random_bool(0.2) { vec![format!("https://example.org/{i}")] } else { vec![] },
            "media": media,
            "user": {
                "id": author.id,
                "created_at": iso(author.created),
                "friends_count": author.friends,
                "followers_count": author.followers,
                "statuses_count": author.statuses,
                "verified": author.verified,
            }
        });
        if rng.random_bool(0.8) {
            record["coordinates"] = json!({"lat": loc.lat, "lon": loc.lon});
        } else {
            let (a, b) = (0.04, 0.05);
            record["place"] = json!({"vertices": [
                {"lat": loc.lat - a, "lon": loc.lon - b}, {"lat": loc.lat - a, "lon": loc.lon + b},
                {"lat": loc.lat + a, "lon": loc.lon + b}, {"lat": loc.lat + a, "lon": loc.lon - b},
            ]});
        }
        tweets.push_str(&record.to_string());
        tweets.push('\n');

        let tag_pool = ["Flooding", "Windy", "Destruction"];
        for r in 0..3 {
            let vote = if rng.random_bool(0.92) { related } else { !related };
            let tags = if vote { tag_pool.choose(&mut rng).expect("non-empty").to_string() } else { String::new() };
            let _ = writeln!(labels, "{id},r{r},{vote},{tags}");
        }

        if has_media {
            let p: f64 = if related { rng.random_range(0.55..0.99) } else { rng.random_range(0.01..0.45) };
            if p >= 0.5 {
                let _ = writeln!(
                    images,
                    "m{i:05},{p:.4},{:.4},{:.4},{:.4}",
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0)
                );
            } else {
                let _ = writeln!(images, "m{i:05},{p:.4},,,");
            }
        }
    }
    let bad = [
        "{not json".to_string(),
        json!({"id": "late", "created_at": iso(STUDY_START.0 + span + 10), "coordinates": {"lat": 27.0, "lon": -81.0},
            "user": {"id": "u0000", "created_at": iso(STUDY_START.0 - 86_400), "friends_count": 1,
                     "followers_count": 1, "statuses_count": 1, "verified": false}})
        .to_string(),
        json!({"id": "nowhere", "created_at": iso(STUDY_START.0 + 60),
            "user": {"id": "u0000", "created_at": iso(STUDY_START.0 - 86_400), "friends_count": 1,
                     "followers_count": 1, "statuses_count": 1, "verified": false}})
        .to_string(),
    ];
    for line in bad.iter().cycle().take(spec.bad_lines) {
        tweets.push_str(line);
        tweets.push('\n');
    }

    let files = ScenarioFiles {
        dir: dir.to_path_buf(),
        config: dir.join("stormsift.conf"),
        tweets: dir.join("tweets.ndjson"),
        sensors: dir.join("sensors.csv"),
        track: dir.join("track.csv"),
        labels: dir.join("labels.csv"),
        image_scores: dir.join("image_scores.csv"),
    };
    std::fs::write(&files.tweets, tweets)?;
    std::fs::write(&files.sensors, sensors)?;
    std::fs::write(&files.track, track)?;
    std::fs::write(&files.labels, labels)?;
    std::fs::write(&files.image_scores, images)?;
    let config = format!(
        "# synthetic hurricane scenario, seed {seed}\n\
         study_start={start}\nstudy_end={end}\n\
         tweets=tweets.ndjson\nsensors=sensors.csv\ntrack=track.csv\nlabels=labels.csv\nimage_scores=image_scores.csv\n\
         work_dir=work\nseed_term=hurricane\nsegment_hours=24\ntext_formula=DP\ndimension=50\nepochs=5\n\
         user_classifier=random_forest\nn_trees=50\nmax_depth=8\n\
         geo_min=50\ntext_min=30\nuser_min=85\nimage_min=85\nseed={seed}\n",
        seed = spec.seed,
        start = iso(STUDY_START.0),
        end = iso(STUDY_START.0 + span),
    );
    std::fs::write(&files.config, config)?;
    Ok(files)
}
