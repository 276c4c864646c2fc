//! Synthetic stand-ins for the CrowdRE stories: templated smart-home
//! requirements with per-domain vocabularies and shared filler.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storytopics::corpus::{Corpus, DomainLabel, UserStory};

const HEALTH: &[&str] = &[
    "medication", "pill", "doctor", "heart", "rate", "blood", "pressure", "sleep", "diet", "fitness",
    "exercise", "weight", "insulin", "allergy", "inhaler", "elderly", "grandmother", "fall", "nurse", "pulse",
    "vitamins", "hydration", "calories", "symptoms", "therapy", "posture", "stress", "wellbeing", "clinic", "prescription",
];
const ENERGY: &[&str] = &[
    "thermostat", "heating", "electricity", "solar", "panel", "bill", "consumption", "insulation", "radiator", "usage",
    "appliance", "standby", "kilowatt", "meter", "cooling", "airconditioner", "boiler", "window", "draft", "savings",
    "lights", "bulbs", "charger", "battery", "grid", "tariff", "peak", "washer", "dryer", "temperature",
];
const ENTERTAINMENT: &[&str] = &[
    "music", "song", "playlist", "movie", "television", "speaker", "game", "console", "radio", "podcast",
    "streaming", "volume", "album", "concert", "netflix", "channel", "karaoke", "party", "dance", "projector",
    "sound", "headphones", "film", "series", "episode", "genre", "artist", "guitar", "piano", "mood",
];
const SAFETY: &[&str] = &[
    "door", "lock", "alarm", "camera", "intruder", "burglar", "smoke", "fire", "carbon", "monoxide",
    "gas", "leak", "flood", "sensor", "motion", "garage", "gate", "keys", "police", "emergency",
    "children", "stove", "oven", "detector", "break", "security", "doorbell", "stranger", "pool", "fence",
];
const OTHER: &[&str] = &[
    "plants", "garden", "groceries", "laundry", "mail", "package", "calendar", "recipe", "fridge", "vacuum",
    "dishes", "trash", "recycling", "shopping", "weather", "umbrella", "closet", "clothes", "pantry", "milk",
];
const SHARED: &[&str] = &[
    "notify", "phone", "app", "automatically", "room", "house", "family", "morning", "night", "remind",
    "alert", "control", "monitor", "schedule", "turn", "adjust", "check", "track", "remotely", "voice",
    "device", "system", "time", "day", "week", "kitchen", "bedroom", "living", "away", "home",
];
const FILLER: &[&str] = &["the", "my", "to", "when", "is", "a", "and", "of", "it", "on", "in", "for", "so", "me"];
const ROLES: &[&str] = &["smart home owner", "parent", "pet owner", "student", "retiree"];

pub fn domain_words(label: DomainLabel) -> &'static [&'static str] {
    match label {
        DomainLabel::Health => HEALTH,
        DomainLabel::Energy => ENERGY,
        DomainLabel::Entertainment => ENTERTAINMENT,
        DomainLabel::Safety => SAFETY,
        DomainLabel::Other => OTHER,
    }
}

/// Class proportions roughly like the real data: Safety largest, Other
/// smallest.
const MIX: [(DomainLabel, f64); 5] = [
    (DomainLabel::Safety, 0.28),
    (DomainLabel::Energy, 0.22),
    (DomainLabel::Health, 0.19),
    (DomainLabel::Entertainment, 0.18),
    (DomainLabel::Other, 0.13),
];

fn phrase(rng: &mut ChaCha8Rng, label: DomainLabel, content: usize) -> String {
    let own = domain_words(label);
    let mut words = Vec::new();
    for _ in 0..content {
        let w = if rng.gen_bool(0.65) {
            own.choose(rng).unwrap()
        } else {
            SHARED.choose(rng).unwrap()
        };
        words.push(*w);
        if rng.gen_bool(0.5) {
            words.push(FILLER.choose(rng).unwrap());
        }
    }
    words.join(" ")
}

/// `n` stories with ids 1..=n.
pub fn synthetic_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stories = (0..n)
        .map(|i| {
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let mut label = DomainLabel::Other;
            for (l, p) in MIX {
                acc += p;
                if r < acc {
                    label = l;
                    break;
                }
            }
            let role = ROLES.choose(&mut rng).unwrap();
            let (nf, nb) = (rng.gen_range(3..8), rng.gen_range(1..5));
            let feature = format!("my smart home to {}", phrase(&mut rng, label, nf));
            let benefit = format!("I can {}", phrase(&mut rng, label, nb));
            UserStory::new(i as u64 + 1, role, &feature, &benefit, label, vec![])
        })
        .collect();
    Corpus::from_stories(stories).unwrap()
}

/// Two groups of `per_group` documents over disjoint three-word
/// vocabularies, each document 8..16 tokens long.
pub fn disjoint_vocab_docs(per_group: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = [["a", "b", "c"], ["x", "y", "z"]];
    let mut docs = Vec::new();
    for g in &groups {
        for _ in 0..per_group {
            let len = rng.gen_range(8..16);
            docs.push((0..len).map(|_| g.choose(&mut rng).unwrap().to_string()).collect());
        }
    }
    docs
}

/// `per_blob` points per blob in `dim` dimensions; blob `b` is centered at
/// `b · separation` on every axis with per-axis spread `radius`.
pub fn gaussian_blobs(blobs: usize, per_blob: usize, dim: usize, separation: f64, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, radius).unwrap();
    (0..blobs)
        .flat_map(|b| (0..per_blob).map(move |_| b))
        .map(|b| (0..dim).map(|_| b as f64 * separation + noise.sample(&mut rng)).collect())
        .collect()
}
