//! Seeded fixture generators and independently coded reference
//! computations shared by the integration tests.
#![allow(dead_code)]

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormsift_core::ingest::{IncidentTag, LabelRecord, TimeWindow, Timestamp};
use stormsift_core::text::TokenizedTweet;

/// SplitMix64 stream, reproducible bit for bit outside Rust.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Box-Muller, cosine branch only.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dist {
    Normal,
    Exponential,
    Uniform,
}

pub fn sample(dist: Dist, n: usize, seed: u64) -> Vec<f64> {
    let mut g = SplitMix64(seed);
    (0..n)
        .map(|_| match dist {
            Dist::Normal => g.normal(),
            Dist::Exponential => g.exponential(),
            Dist::Uniform => g.uniform(),
        })
        .collect()
}

/// Ten samples with W computed by scipy.stats.shapiro (scipy 1.15.3) on the
/// same SplitMix64 streams.
pub const SHAPIRO_REFERENCE: [(Dist, usize, u64, f64); 10] = [
    (Dist::Normal, 20, 1, 0.945641319795795),
    (Dist::Normal, 200, 2, 0.9962897686690293),
    (Dist::Normal, 5000, 3, 0.9997337534857622),
    (Dist::Exponential, 20, 4, 0.9481326900074661),
    (Dist::Exponential, 200, 5, 0.7907270763873696),
    (Dist::Exponential, 5000, 6, 0.8182319325323563),
    (Dist::Uniform, 20, 7, 0.9360773317424733),
    (Dist::Uniform, 200, 8, 0.9528399048987213),
    (Dist::Uniform, 5000, 9, 0.953384577492385),
    (Dist::Normal, 200, 10, 0.9960513600389481),
];

/// Log-normal sample `exp(N(mu, sigma))`.
pub fn lognormal(n: usize, mu: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut g = SplitMix64(seed);
    (0..n).map(|_| (mu + sigma * g.normal()).exp()).collect()
}

/// Inverse-distance weighting evaluated from scratch: distances are chord
/// lengths between unit vectors converted to arcs.
pub fn idw_reference(p: (f64, f64), stations: &[((f64, f64), f64)], k: f64) -> f64 {
    let unit = |(lat, lon): (f64, f64)| {
        let (la, lo) = (lat.to_radians(), lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let a = unit(p);
    let arc = |b: [f64; 3]| {
        let chord = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        2.0 * 3958.8 * (chord / 2.0).min(1.0).asin()
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for &(loc, v) in stations {
        let d = arc(unit(loc));
        if d < 1e-6 {
            return v;
        }
        num += v / d.powf(k);
        den += 1.0 / d.powf(k);
    }
    num / den
}

/// Box-Cox profile log-likelihood maximised over a grid of `step`.
pub fn boxcox_grid_lambda(xs: &[f64], lo: f64, hi: f64, step: f64) -> f64 {
    let n = xs.len() as f64;
    let log_sum: f64 = xs.iter().map(|x| x.ln()).sum();
    let llf = |lambda: f64| {
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| if lambda.abs() < 1e-12 { x.ln() } else { (x.powf(lambda) - 1.0) / lambda })
            .collect();
        let m = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n;
        (lambda - 1.0) * log_sum - n / 2.0 * var.ln()
    };
    let steps = ((hi - lo) / step).round() as i64;
    (0..=steps)
        .map(|i| lo + i as f64 * step)
        .map(|l| (l, llf(l)))
        .fold((f64::NAN, f64::NEG_INFINITY), |best, (l, v)| if v > best.1 { (l, v) } else { best })
        .0
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by enumerating every pair.
pub fn auroc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    total += 1.0;
                } else if scores[i] == scores[j] {
                    total += 0.5;
                }
            }
        }
    }
    total / pairs
}

const STORM: [&str; 12] = [
    "flood", "surge", "winds", "evacuate", "shelter", "landfall", "rain", "damage", "storm", "power", "outage", "debris",
];
const TOPICS: [&str; 24] = [
    "pizza", "cheese", "oven", "slice", "dinner", "recipe", "game", "score", "team", "coach", "season", "playoff",
    "movie", "actor", "ticket", "popcorn", "trailer", "sequel", "music", "concert", "guitar", "album", "singer", "tour",
];
const FILLER: [&str; 8] = ["today", "people", "city", "home", "time", "friends", "morning", "night"];

/// Related messages draw two to four words from a storm cluster and
/// sometimes the seed term itself; unrelated ones draw from unrelated
/// topics. Cross-talk: 30% of related messages carry one off-topic word and
/// 15% of unrelated ones carry one storm word. Both add shared filler
/// words. All messages fall in hours `0..hours`.
pub fn planted_text_corpus(n: usize, related_fraction: f64, hours: u32, seed: u64) -> Vec<(TokenizedTweet, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let related = rng.random::<f64>() < related_fraction;
            let mut tokens: Vec<String> = Vec::new();
            let k = rng.random_range(2..=4);
            for _ in 0..k {
                let w = if related {
                    STORM[rng.random_range(0..STORM.len())]
                } else {
                    TOPICS[rng.random_range(0..TOPICS.len())]
                };
                tokens.push(w.to_string());
            }
            if related && rng.random::<f64>() < 0.4 {
                tokens.push("hurricane".into());
            }
            if related && rng.random::<f64>() < 0.3 {
                tokens.push(TOPICS[rng.random_range(0..TOPICS.len())].to_string());
            }
            if !related && rng.random::<f64>() < 0.15 {
                tokens.push(STORM[rng.random_range(0..STORM.len())].to_string());
            }
            for _ in 0..rng.random_range(1..=3) {
                tokens.push(FILLER[rng.random_range(0..FILLER.len())].to_string());
            }
            let cut = rng.random_range(0..=tokens.len());
            tokens.rotate_left(cut);
            let window = TimeWindow::from_index(rng.random_range(0..hours), Timestamp(0));
            (TokenizedTweet { tweet_id: format!("t{i}"), tokens, window }, related)
        })
        .collect()
}

/// Author features where verification is decided by follower count alone,
/// inside a band of `log10(followers)`, so no single linear cut separates
/// the classes. Column 2 (followers) carries all the signal; the rest are
/// independent noise. Exactly `n / (ratio + 1)` authors are verified.
pub fn banded_users(n: usize, ratio: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = n / (ratio + 1);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let verified = i < n_pos;
        let log_followers = if verified {
            rng.random_range(4.0..4.6)
        } else if rng.random::<bool>() {
            rng.random_range(0.5..3.9)
        } else {
            rng.random_range(4.7..7.0)
        };
        let age = rng.random_range(10.0..4000.0);
        let statuses = rng.random_range(0.0..50_000.0_f64).floor();
        x.push(vec![
            age,
            rng.random_range(0.0..5000.0_f64).floor(),
            10f64.powf(log_followers).floor(),
            statuses,
            f64::from(u8::from(rng.random::<bool>())),
            rng.random_range(0.0..20.0_f64).floor(),
            f64::from(u8::from(rng.random::<bool>())),
            f64::from(u8::from(rng.random::<bool>())),
            statuses / age,
        ]);
        y.push(verified);
    }
    (x, y)
}

/// Same feature layout as [`banded_users`], but verified exactly when
/// followers reach 10^4 (log-uniform followers, about half verified).
pub fn threshold_users(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let (mut x, _) = banded_users(n, 1, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF0F0);
    let y = x
        .iter_mut()
        .map(|row| {
            let log_followers: f64 = rng.random_range(2.0..6.0);
            row[2] = 10f64.powf(log_followers).floor();
            row[2] >= 10_000.0
        })
        .collect();
    (x, y)
}

pub fn xor_points() -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..50 {
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let j = i as f64 * 1e-3;
            x.push(vec![a + j, b - j]);
            y.push((a > 0.5) != (b > 0.5));
        }
    }
    (x, y)
}

/// Blue water scenes tagged Flooding, grey rubble tagged Destruction, and
/// plain green unrelated scenes, with seeded pixel noise.
pub fn synthetic_images(n: usize, seed: u64) -> Vec<(RgbImage, LabelRecord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let kind = i % 3;
            let size = 16;
            let mut jitter = |base: u8, spread: i32| {
                (base as i32 + rng.random_range(-spread..=spread)).clamp(0, 255) as u8
            };
            let img = match kind {
                0 => RgbImage::from_fn(size, size, |_, _| Rgb([jitter(30, 20), jitter(70, 25), jitter(190, 30)])),
                1 => {
                    let mut img = RgbImage::new(size, size);
                    for y in 0..size {
                        for x in 0..size {
                            let g = if (x / 2 + y / 2) % 2 == 0 { jitter(70, 15) } else { jitter(170, 15) };
                            img.put_pixel(x, y, Rgb([g, g, g]));
                        }
                    }
                    img
                }
                _ => RgbImage::from_fn(size, size, |_, _| Rgb([jitter(50, 20), jitter(160, 25), jitter(50, 20)])),
            };
            let (related, tags) = match kind {
                0 => (true, vec![IncidentTag::Flooding]),
                1 => (true, vec![IncidentTag::Destruction]),
                _ => (false, vec![]),
            };
            (img, LabelRecord::new(format!("img{i}"), "synthetic", related, tags).expect("valid label"))
        })
        .collect()
}

/// Geo features of a synthetic storm: distance to the eye log-uniform over
/// 1 to 500 miles, wind decaying with distance, log-normal rain. The
/// product `wind * rain` spans more than four decades. Messages closer to
/// the eye are more often related.
pub fn synthetic_storm(n: usize, seed: u64) -> Vec<(stormsift_core::geo::GeoFeatures, bool)> {
    let mut g = SplitMix64(seed);
    let window = TimeWindow::from_index(0, Timestamp(0));
    (0..n)
        .map(|_| {
            let d = 500f64.powf(g.uniform());
            let wind = 120.0 * (1.0 + d / 30.0).powf(-0.6) * (0.3 * g.normal()).exp();
            let rain = (-1.0 + 1.2 * g.normal()).exp();
            let related = g.uniform() < 1.0 / (1.0 + (d / 40.0).powi(2));
            (stormsift_core::geo::GeoFeatures::new(wind, rain, d, window, 1.0).expect("finite features"), related)
        })
        .collect()
}

pub fn dummy_tweet(id: &str, created: i64) -> stormsift_core::ingest::TweetRecord {
    use stormsift_core::ingest::{GeoLocation, LocationKind, TweetRecord, UserProfile};
    TweetRecord {
        id: id.into(),
        created_at: Timestamp(created),
        text: String::new(),
        location: GeoLocation { lat: 27.0, lon: -82.0 },
        location_kind: LocationKind::Coordinates,
        hashtags: vec![],
        weblinks: vec![],
        media: vec![],
        author: UserProfile {
            user_id: "u".into(),
            account_created_at: Timestamp(0),
            friends_count: 0,
            followers_count: 0,
            statuses_count: 0,
            verified: false,
        },
    }
}
