//! Deterministic synthetic corpora: class lexicons, a London gazetteer,
//! templated incident reports for the CRF, a templated grammar for the
//! windowed tagger, annotated tweets for fusion and replay, and an
//! authority-record stream with known lead times.
//!
//! Every generator takes an explicit seed and produces the same output for
//! the same seed on every platform.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnn::{entity_index, pos_index, PosSentence};
use crate::crf::TaggedSentence;
use crate::error::Result;
use crate::geo::GeoPoint;
use crate::impact::Gazetteer;
use crate::similarity::{AuthorityKind, AuthorityRecord};
use crate::text::{tokenize, AnnotatedTweet, BioTag, ClassDictionary, DictionarySet, EventClass, Tweet};

pub const CRIME: &[&str] = &[
    "stabbing",
    "shooting",
    "robbery",
    "burglary",
    "mugging",
    "arrest",
    "assault",
    "theft",
    "pickpockets",
    "knife attack",
    "police chase",
    "gang violence",
    "break-in",
    "shoplifting",
    "vandalism",
    "arson",
    "fraud",
    "drug raid",
    "murder",
    "attempted murder",
    "carjacking",
    "moped thieves",
    "phone snatching",
    "hit and run",
    "kidnapping",
    "police cordon",
    "armed police",
    "stolen car",
    "street fight",
    "acid attack",
    "looting",
    "smash and grab",
];

pub const CULTURAL: &[&str] = &[
    "exhibition",
    "art exhibition",
    "gallery opening",
    "museum late",
    "concert",
    "gig",
    "music festival",
    "theatre",
    "opera",
    "ballet",
    "book launch",
    "poetry reading",
    "film screening",
    "premiere",
    "jazz",
    "live music",
    "orchestra",
    "comedy night",
    "musical",
    "west end show",
    "art fair",
    "street art",
    "dance performance",
    "choir",
    "photography exhibition",
    "literature festival",
    "classical concert",
    "open mic",
    "cinema",
    "sculpture",
    "installation",
    "carnival",
];

pub const FOOD: &[&str] = &[
    "food",
    "street food",
    "food market",
    "pizza",
    "burger",
    "brunch",
    "sushi",
    "ramen",
    "curry",
    "fish and chips",
    "bakery",
    "coffee",
    "craft beer",
    "cocktails",
    "pop-up restaurant",
    "tasting menu",
    "vegan cafe",
    "dim sum",
    "tacos",
    "noodles",
    "dumplings",
    "afternoon tea",
    "cheese",
    "doughnuts",
    "ice cream",
    "barbecue",
    "sunday roast",
    "brewery",
    "wine bar",
    "supper club",
    "bao",
    "falafel",
];

pub const SOCIAL: &[&str] = &[
    "protest",
    "demonstration",
    "rally",
    "election",
    "vote",
    "voting",
    "polling station",
    "referendum",
    "petition",
    "vigil",
    "charity run",
    "fundraiser",
    "community meeting",
    "town hall meeting",
    "campaign",
    "picket line",
    "sit-in",
    "protesters",
    "activists",
    "public meeting",
    "street party",
    "volunteers",
    "campaigners",
    "climate protest",
    "student protest",
    "candlelight vigil",
    "counter protest",
    "walkout",
    "pride parade",
    "hustings",
    "ballot",
    "neighbourhood watch",
];

pub const SPORT: &[&str] = &[
    "football",
    "marathon",
    "premier league",
    "cricket",
    "tennis",
    "wimbledon",
    "rugby",
    "boat race",
    "cycling",
    "half marathon",
    "derby",
    "kick off",
    "penalty",
    "arsenal",
    "tottenham",
    "west ham",
    "fulham",
    "boxing",
    "athletics",
    "darts",
    "fa cup",
    "champions league",
    "park run",
    "triathlon",
    "rowing",
    "swimming gala",
    "final whistle",
    "golf",
    "netball",
    "hat trick",
    "extra time",
    "world cup",
];

pub const WEATHER: &[&str] = &[
    "rain",
    "heavy rain",
    "snow",
    "sleet",
    "hail",
    "fog",
    "thick fog",
    "thunderstorm",
    "lightning",
    "storm",
    "strong winds",
    "gale",
    "heatwave",
    "sunshine",
    "rainbow",
    "flooding",
    "flash flood",
    "drizzle",
    "frost",
    "black ice",
    "icy roads",
    "blizzard",
    "cold snap",
    "downpour",
    "showers",
    "hailstorm",
    "sunny spells",
    "smog",
    "high winds",
    "freezing temperatures",
    "mist",
    "humidity",
];

pub const TRANSPORTATION: &[&str] = &[
    "traffic",
    "heavy traffic",
    "traffic jam",
    "road closed",
    "road closure",
    "accident",
    "crash",
    "collision",
    "tube delays",
    "delays",
    "signal failure",
    "bus diverted",
    "diversion",
    "congestion",
    "roadworks",
    "tube strike",
    "rail strike",
    "train cancelled",
    "cancellations",
    "station closed",
    "severe delays",
    "broken down bus",
    "lane closed",
    "gridlock",
    "tailbacks",
    "flight delays",
    "level crossing",
    "breakdown",
    "queueing traffic",
    "burst water main",
    "overturned lorry",
    "closed lane",
];

/// Places with approximate WGS84 coordinates `(name, lat, lon)`. The last
/// few are venues rather than districts.
pub const PLACES: &[(&str, f64, f64)] = &[
    ("piccadilly circus", 51.5100, -0.1347),
    ("oxford street", 51.5154, -0.1419),
    ("camden town", 51.5390, -0.1426),
    ("soho", 51.5136, -0.1365),
    ("covent garden", 51.5117, -0.1240),
    ("leicester square", 51.5103, -0.1301),
    ("trafalgar square", 51.5080, -0.1281),
    ("brixton", 51.4613, -0.1156),
    ("shoreditch", 51.5265, -0.0780),
    ("hackney", 51.5450, -0.0553),
    ("islington", 51.5362, -0.1033),
    ("king's cross", 51.5308, -0.1238),
    ("euston", 51.5282, -0.1337),
    ("waterloo", 51.5031, -0.1132),
    ("london bridge", 51.5079, -0.0877),
    ("tower bridge", 51.5055, -0.0754),
    ("westminster", 51.4995, -0.1248),
    ("hyde park", 51.5073, -0.1657),
    ("regent's park", 51.5313, -0.1570),
    ("greenwich", 51.4826, -0.0077),
    ("stratford", 51.5413, -0.0032),
    ("clapham", 51.4620, -0.1380),
    ("peckham", 51.4740, -0.0690),
    ("notting hill", 51.5090, -0.1960),
    ("kensington", 51.4988, -0.1749),
    ("canary wharf", 51.5054, -0.0235),
    ("hammersmith", 51.4927, -0.2248),
    ("paddington", 51.5154, -0.1755),
    ("victoria", 51.4952, -0.1441),
    ("marble arch", 51.5131, -0.1589),
    ("holborn", 51.5174, -0.1201),
    ("angel", 51.5322, -0.1058),
    ("wembley", 51.5560, -0.2796),
    ("blackfriars", 51.5116, -0.1037),
    ("southwark", 51.5035, -0.1045),
    ("bethnal green", 51.5270, -0.0549),
    ("whitechapel", 51.5196, -0.0599),
    ("elephant and castle", 51.4946, -0.1003),
    ("barbican", 51.5200, -0.0937),
    ("westway", 51.5202, -0.2108),
    ("dalston", 51.5462, -0.0753),
    ("euston road", 51.5260, -0.1340),
    ("the good life eatery", 51.4960, -0.1610),
    ("the golden fork", 51.5140, -0.1310),
    ("the blue door kitchen", 51.5230, -0.0800),
    ("rose and crown", 51.5010, -0.1190),
];

/// Venues used by food tweets; all are in [`PLACES`].
const VENUES: &[&str] = &[
    "the good life eatery",
    "the golden fork",
    "the blue door kitchen",
    "rose and crown",
];

/// One-word weather terms that double as venue-menu adjectives.
const MENU_WEATHER: &[&str] = &["rainbow", "sunshine", "snow", "storm", "frost"];

pub fn lexicon(class: EventClass) -> Vec<&'static str> {
    match class {
        EventClass::Crime => CRIME.to_vec(),
        EventClass::Cultural => CULTURAL.to_vec(),
        EventClass::Food => FOOD.to_vec(),
        EventClass::Social => SOCIAL.to_vec(),
        EventClass::Sport => SPORT.to_vec(),
        EventClass::Weather => WEATHER.to_vec(),
        EventClass::Transportation => TRANSPORTATION.to_vec(),
        EventClass::Location => PLACES.iter().map(|p| p.0).collect(),
        EventClass::Other => Vec::new(),
    }
}

/// Dictionaries built from the built-in lexicons, one per span class.
pub fn dictionary_set() -> DictionarySet {
    DictionarySet::new(
        EventClass::SPAN
            .iter()
            .map(|&c| ClassDictionary::from_lines(c, "built-in", lexicon(c)).expect("lexicons are non-empty"))
            .collect(),
    )
}

/// Lexicon file body: one phrase per line.
pub fn dictionary_file(class: EventClass) -> String {
    let mut s = format!("# {class} phrases\n");
    for p in lexicon(class) {
        s.push_str(p);
        s.push('\n');
    }
    s
}

pub fn gazetteer() -> Gazetteer {
    let mut g = Gazetteer::default();
    for &(name, lat, lon) in PLACES {
        g.insert(name, GeoPoint::new(lat, lon).expect("valid place"));
    }
    g
}

/// `name,lat,lon` CSV of [`PLACES`].
pub fn gazetteer_csv() -> String {
    let mut s = String::from("name,lat,lon\n");
    for &(name, lat, lon) in PLACES {
        s.push_str(&format!("{name},{lat},{lon}\n"));
    }
    s
}

/// Text and gold tags assembled piece by piece.
#[derive(Debug, Default)]
struct Draft {
    text: String,
    tags: Vec<BioTag>,
}

impl Draft {
    fn push(&mut self, piece: &str, class: Option<EventClass>) -> Result<()> {
        let n = tokenize(piece)?.len();
        if !self.text.is_empty() {
            self.text.push(' ');
        }
        self.text.push_str(piece);
        for i in 0..n {
            self.tags.push(match class {
                None => BioTag::Outside,
                Some(c) if i == 0 => BioTag::Begin(c),
                Some(c) => BioTag::Inside(c),
            });
        }
        Ok(())
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty list")
}

fn pick_class<R: Rng>(rng: &mut R, except: Option<EventClass>) -> EventClass {
    loop {
        let c = *EventClass::EVENTS.choose(rng).expect("seven classes");
        if Some(c) != except {
            return c;
        }
    }
}

/// Slots: `{E}` and `{E2}` event phrases of two distinct classes, `{L}` a
/// place. Everything else is literal.
const REPORT_TEMPLATES: &[&str] = &[
    "{E} reported near {L}",
    "{E} at {L} this morning",
    "officials confirm {E} in {L}",
    "{L} : {E} expected later today",
    "{E} causing problems around {L}",
    "avoid {L} due to {E}",
    "{E} tonight at {L}",
    "huge {E} in {L} today",
    "{L} hit by {E}",
    "update on {E} near {L}",
    "{E} and {E2} around {L}",
    "there was {E} outside {L} earlier",
    "witnesses describe {E} close to {L}",
    "{E} planned for {L} next week",
    "so much {E} in {L} right now",
    "breaking : {E} near {L}",
    "{E} !",
    "{E} then {E2} by {L}",
];

fn fill<R: Rng>(rng: &mut R, templates: &[&str], first: EventClass) -> Result<(Draft, BTreeSet<EventClass>)> {
    let template = pick(rng, templates);
    let second = pick_class(rng, Some(first));
    let mut d = Draft::default();
    let mut labels = BTreeSet::new();
    for word in template.split_whitespace() {
        match word {
            "{E}" => {
                d.push(pick(rng, &lexicon(first)), Some(first))?;
                labels.insert(first);
            }
            "{E2}" => {
                d.push(pick(rng, &lexicon(second)), Some(second))?;
                labels.insert(second);
            }
            "{L}" => d.push(pick(rng, &lexicon(EventClass::Location)), Some(EventClass::Location))?,
            "{U}" => d.push(&format!("@user{}", rng.random_range(1..500)), None)?,
            "{X}" => d.push(&format!("https://t.co/{:08x}", rng.random::<u32>()), None)?,
            "{N}" => d.push(&rng.random_range(2..60).to_string(), None)?,
            w => d.push(w, None)?,
        }
    }
    Ok((d, labels))
}

fn report_drafts(n: usize, seed: u64) -> Result<Vec<(Draft, BTreeSet<EventClass>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let class = pick_class(&mut rng, None);
            fill(&mut rng, REPORT_TEMPLATES, class)
        })
        .collect()
}

/// Short incident reports with gold BIO tags, every event and place phrase
/// drawn from the class lexicons.
pub fn report_corpus(n: usize, seed: u64) -> Result<Vec<TaggedSentence>> {
    report_drafts(n, seed)?
        .into_iter()
        .map(|(d, _)| {
            Ok(TaggedSentence {
                tokens: tokenize(&d.text)?,
                tags: d.tags,
            })
        })
        .collect()
}

/// The reports of [`report_corpus`] as annotated records (ids `r0001`, ...,
/// one minute apart from `start`) so they can share a file with tweets.
pub fn annotated_reports(n: usize, seed: u64, start: DateTime<Utc>) -> Result<Vec<AnnotatedTweet>> {
    report_drafts(n, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, (d, labels))| {
            let t = Tweet::new(
                format!("r{:04}", i + 1),
                d.text,
                start + Duration::minutes(i as i64),
                None,
            )?;
            AnnotatedTweet::new(t, labels, Some(d.tags))
        })
        .collect()
}

/// Token-level F1 over non-`O` gold and predicted tags: a prediction is a
/// true positive only when it equals the gold tag.
pub fn token_f1(gold: &[Vec<BioTag>], predicted: &[Vec<BioTag>]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (g, p) in gold.iter().zip(predicted) {
        for (&g, &p) in g.iter().zip(p) {
            if g == p && !g.is_outside() {
                tp += 1;
            } else {
                if !p.is_outside() {
                    fp += 1;
                }
                if !g.is_outside() {
                    fneg += 1;
                }
            }
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    2.0 * precision * recall / (precision + recall)
}

const DET: &[&str] = &["the", "a", "this", "every", "each"];
const ADJ: &[&str] = &[
    "old", "new", "large", "small", "famous", "busy", "quiet", "historic", "modern", "green", "ancient", "popular",
    "narrow", "wide", "public",
];
const NOUN: &[&str] = &[
    "market", "bridge", "station", "church", "park", "street", "square", "river", "building", "tower", "school",
    "library", "garden", "hospital", "road", "palace", "hall", "crowd", "visitor", "district",
];
const VERB: &[&str] = &[
    "opened",
    "closed",
    "attracts",
    "hosts",
    "serves",
    "connects",
    "crosses",
    "houses",
    "overlooks",
    "borders",
    "includes",
    "replaced",
    "joined",
    "visited",
];
const ADV: &[&str] = &[
    "also",
    "often",
    "still",
    "recently",
    "originally",
    "nearly",
    "slowly",
    "again",
    "now",
    "today",
];
const ADP: &[&str] = &[
    "near", "in", "at", "beside", "across", "from", "behind", "under", "along",
];
const AUX: &[&str] = &["is", "was"];
const PRON: &[&str] = &["it", "they", "she", "he", "we"];
const CCONJ: &[&str] = &["and", "but", "or"];
const SCONJ: &[&str] = &["because", "while", "although"];
const ORGS: &[&str] = &[
    "met police",
    "city council",
    "national trust",
    "royal society",
    "transport authority",
    "port authority",
    "bbc",
    "nhs",
    "arts council",
    "british library",
];

/// Grammar templates over part-of-speech slots. `LOC` and `ORG` expand to
/// multi-word proper names carrying entity tags.
const GRAMMAR: &[&[&str]] = &[
    &["DET", "ADJ", "NOUN", "VERB", "ADP", "LOC", "."],
    &["LOC", "AUX", "DET", "ADJ", "NOUN", "ADP", "LOC", "."],
    &["ORG", "VERB", "DET", "NOUN", "ADP", "LOC", "."],
    &["DET", "NOUN", "ADV", "VERB", "NUM", "NOUN", "."],
    &["PRON", "VERB", "DET", "ADJ", "NOUN", "CCONJ", "DET", "NOUN", "."],
    &[
        "ADP", "NUM", ",", "DET", "NOUN", "VERB", "DET", "NOUN", "ADP", "LOC", ".",
    ],
    &[
        "DET", "NOUN", "AUX", "not", "ADJ", "SCONJ", "PRON", "VERB", "ADP", "LOC", ".",
    ],
    &["LOC", "VERB", "DET", "NOUN", "CCONJ", "ORG", "VERB", "PRON", "."],
    &["DET", "NOUN", "VERB", "£", "NUM", "."],
    &["PRON", "VERB", "ADP", "LOC", "ADV", "CCONJ", "PRON", "VERB", "."],
    &["DET", "NOUN", "ADP", "LOC", ",", "DET", "ADJ", "NOUN", "."],
    &["NUM", "NOUN", "ADP", "LOC", "CCONJ", "ADV", "VERB", "."],
];

/// Encyclopedic-style sentences with gold part-of-speech and LOC/ORG tags.
/// Place names containing a conjunction are left out so every word keeps a
/// single part of speech.
pub fn pos_corpus(n: usize, seed: u64) -> Result<Vec<PosSentence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let places: Vec<&str> = PLACES
        .iter()
        .map(|p| p.0)
        .filter(|p| !p.split(' ').any(|w| matches!(w, "and" | "the")))
        .collect();
    let idx = |t: &str| pos_index(t).expect("known tag");
    let ent = |t: &str| entity_index(t).expect("known tag");
    (0..n)
        .map(|_| {
            let template = GRAMMAR.choose(&mut rng).expect("templates");
            let (mut tokens, mut pos, mut ner) = (Vec::new(), Vec::new(), Vec::new());
            let mut push = |w: &str, p: &str, e: &str| {
                tokens.push(w.to_string());
                pos.push(idx(p));
                ner.push(ent(e));
            };
            for slot in template.iter() {
                let (list, tag): (&[&str], &str) = match *slot {
                    "DET" => (DET, "DET"),
                    "ADJ" => (ADJ, "ADJ"),
                    "NOUN" => (NOUN, "NOUN"),
                    "VERB" => (VERB, "VERB"),
                    "ADV" => (ADV, "ADV"),
                    "ADP" => (ADP, "ADP"),
                    "AUX" => (AUX, "AUX"),
                    "PRON" => (PRON, "PRON"),
                    "CCONJ" => (CCONJ, "CCONJ"),
                    "SCONJ" => (SCONJ, "SCONJ"),
                    "LOC" | "ORG" => {
                        let name = if *slot == "LOC" {
                            pick(&mut rng, &places)
                        } else {
                            pick(&mut rng, ORGS)
                        };
                        for (i, w) in name.split(' ').enumerate() {
                            let e = format!("{}-{}", if i == 0 { "B" } else { "I" }, slot);
                            push(w, "PROPN", &e);
                        }
                        continue;
                    }
                    "NUM" => {
                        push(&rng.random_range(2..2000).to_string(), "NUM", "O");
                        continue;
                    }
                    "not" => {
                        push("not", "PART", "O");
                        continue;
                    }
                    "£" => {
                        push("£", "SYM", "O");
                        continue;
                    }
                    punct => {
                        push(punct, "PUNCT", "O");
                        continue;
                    }
                };
                push(pick(&mut rng, list), tag, "O");
            }
            let tokens = tokens.iter().map(|t| crate::cnn::normalize_word(t)).collect();
            PosSentence::new(tokens, pos, Some(ner))
        })
        .collect()
}

const TWEET_TEMPLATES: &[&str] = &[
    "{E} near {L} right now",
    "omg {E} at {L} #london",
    "anyone else seeing {E} around {L} ?",
    "{E} in {L} again {U}",
    "just saw {E} by {L} {X}",
    "{E} this morning , {L} is a mess",
    "loving the {E} at {L} today",
    "{E} ! {L}",
    "heads up : {E} on {L}",
    "can't believe the {E} in {L}",
    "{E} later at {L} , who's coming ?",
    "{E} everywhere today",
    "so much {E} , unreal",
    "{U} look at this {E} {X}",
    "{N} minutes of {E} near {L} and counting",
];

const MULTI_TEMPLATES: &[&str] = &[
    "{E} and {E2} at {L} tonight",
    "{E} then {E2} near {L} , what a day",
    "{E} plus {E2} in {L} {U}",
];

const OTHER_TEMPLATES: &[&str] = &[
    "good morning everyone",
    "can't wait for the weekend",
    "happy birthday {U} !",
    "watching tv with {U}",
    "so tired today",
    "new phone who dis",
    "monday again ...",
    "what a day",
    "love this song {X}",
    "my cat is asleep on my laptop",
    "lol {U} that's hilarious",
    "cannot find my keys anywhere",
    "back home finally",
    "{N} days until my holiday",
    "just landed in {L}",
    "hello from {L} {U}",
];

/// Food tweets naming a venue whose menu item starts with a weather word.
const MENU_TEMPLATES: &[&str] = &[
    "{W} {F} @ {V}",
    "{W} {F} at {V} , so good",
    "trying the {W} {F} @ {V} {X}",
];

fn menu_tweet<R: Rng>(rng: &mut R) -> Result<Draft> {
    let template = pick(rng, MENU_TEMPLATES);
    let mut d = Draft::default();
    for word in template.split_whitespace() {
        match word {
            "{W}" => d.push(pick(rng, MENU_WEATHER), Some(EventClass::Weather))?,
            "{F}" => d.push(
                pick(rng, &["food", "pizza", "burger", "tacos", "ice cream", "noodles"]),
                Some(EventClass::Food),
            )?,
            "{V}" => d.push(pick(rng, VENUES), Some(EventClass::Location))?,
            "{X}" => d.push(&format!("https://t.co/{:08x}", rng.random::<u32>()), None)?,
            w => d.push(w, None)?,
        }
    }
    Ok(d)
}

/// Settings for [`annotated_tweets`].
#[derive(Debug, Clone)]
pub struct TweetStreamConfig {
    pub n: usize,
    pub seed: u64,
    pub start: DateTime<Utc>,
    /// Largest gap between consecutive tweets, in seconds.
    pub max_gap_s: i64,
    pub other_share: f64,
    pub multi_share: f64,
    /// Share of Food tweets that use a weather-word menu item at a venue.
    pub menu_share: f64,
    pub geotag_share: f64,
    /// Chance that a tweet repeats the previous event's class and place,
    /// which forms thematically coherent groups.
    pub repeat_share: f64,
}

impl Default for TweetStreamConfig {
    fn default() -> Self {
        TweetStreamConfig {
            n: 200,
            seed: 0,
            start: Utc.with_ymd_and_hms(2016, 2, 3, 8, 0, 0).unwrap(),
            max_gap_s: 40,
            other_share: 0.2,
            multi_share: 0.08,
            menu_share: 0.35,
            geotag_share: 0.6,
            repeat_share: 0.3,
        }
    }
}

fn place_point(name: &str) -> GeoPoint {
    let &(_, lat, lon) = PLACES.iter().find(|p| p.0 == name).expect("known place");
    GeoPoint::new(lat, lon).expect("valid place")
}

/// Labelled tweets with gold token tags, ids `t0001`, `t0002`, ... and
/// strictly increasing timestamps. Geotags, when present, sit within about
/// 100 m of the mentioned place.
pub fn annotated_tweets(cfg: &TweetStreamConfig) -> Result<Vec<AnnotatedTweet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n);
    let mut time = cfg.start;
    let mut last_event: Option<(EventClass, String)> = None;
    for i in 0..cfg.n {
        time += Duration::seconds(rng.random_range(1..=cfg.max_gap_s.max(1)));
        let roll: f64 = rng.random();
        let (draft, labels) = if roll < cfg.other_share {
            let (d, _) = fill(&mut rng, OTHER_TEMPLATES, EventClass::Crime)?;
            (d, BTreeSet::from([EventClass::Other]))
        } else if roll < cfg.other_share + cfg.multi_share {
            let first = pick_class(&mut rng, None);
            fill(&mut rng, MULTI_TEMPLATES, first)?
        } else {
            let repeat = last_event.clone().filter(|_| rng.random_bool(cfg.repeat_share));
            match repeat {
                Some((class, place)) => {
                    let mut d = Draft::default();
                    d.push(pick(&mut rng, &["more", "still", "wow"]), None)?;
                    d.push(pick(&mut rng, &lexicon(class)), Some(class))?;
                    d.push("at", None)?;
                    d.push(&place, Some(EventClass::Location))?;
                    (d, BTreeSet::from([class]))
                }
                None => {
                    let class = pick_class(&mut rng, None);
                    if class == EventClass::Food && rng.random_bool(cfg.menu_share) {
                        (menu_tweet(&mut rng)?, BTreeSet::from([EventClass::Food]))
                    } else {
                        fill(&mut rng, TWEET_TEMPLATES, class)?
                    }
                }
            }
        };
        let words: Vec<String> = tokenize(&draft.text)?.into_iter().map(|t| t.text).collect();
        let place = crate::text::spans_from_tags(&draft.tags)
            .into_iter()
            .find(|s| s.class == EventClass::Location)
            .map(|s| words[s.start..s.end].join(" "));
        if let (Some(p), Some(c)) = (&place, labels.iter().find(|c| c.event_index().is_some())) {
            last_event = Some((*c, p.clone()));
        }
        let geo = match &place {
            Some(p) if rng.random_bool(cfg.geotag_share) => {
                let base = place_point(p);
                Some(GeoPoint::new(
                    base.lat + rng.random_range(-0.0008..0.0008),
                    base.lon + rng.random_range(-0.0008..0.0008),
                )?)
            }
            _ => None,
        };
        let mut tweet = Tweet::new(format!("t{:04}", i + 1), draft.text, time, geo)?;
        tweet.user_id = Some(format!("u{}", rng.random_range(1..120)));
        out.push(AnnotatedTweet::new(tweet, labels, Some(draft.tags))?);
    }
    Ok(out)
}

/// Authority records and the timestamped event locations scored against them.
pub type LeadTimeFixture = (Vec<AuthorityRecord>, Vec<(GeoPoint, DateTime<Utc>)>);

/// Authority nodes on a 0.01-degree grid over central London and one tweet
/// event on each node. Of 200 events, 99 precede their record by
/// `17850 + 60 (j - 49)` seconds (`j = 0..99`, mean 297.5 minutes) and the
/// rest follow it by 10 minutes or more.
pub fn lead_time_fixture() -> Result<LeadTimeFixture> {
    const N: usize = 200;
    const EARLY: usize = 99;
    let base = Utc.with_ymd_and_hms(2016, 3, 1, 6, 0, 0).unwrap();
    let mut records = Vec::with_capacity(N);
    let mut events = Vec::with_capacity(N);
    for i in 0..N {
        let p = GeoPoint::new(51.45 + 0.01 * (i / 20) as f64, -0.25 + 0.01 * (i % 20) as f64)?;
        let record_time = base + Duration::minutes(30 * i as i64);
        let lead = if i < EARLY {
            17_850 + 60 * (i as i64 - 49)
        } else {
            -(600 + 60 * (i - EARLY) as i64)
        };
        records.push(AuthorityRecord {
            kind: AuthorityKind::Traffic,
            location: p,
            timestamp: record_time,
            category: "Works".into(),
            source_id: format!("R{i:03}"),
            title: String::new(),
        });
        events.push((p, record_time - Duration::seconds(lead)));
    }
    Ok((records, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tags::is_valid_bio;

    #[test]
    fn lexicons_have_at_least_thirty_phrases() {
        for c in EventClass::SPAN {
            let d = dictionary_set();
            assert!(d.get(c).unwrap().len() >= 30, "{c}");
        }
    }

    #[test]
    fn event_lexicons_do_not_share_phrases() {
        let mut seen = std::collections::HashMap::new();
        for c in EventClass::SPAN {
            for p in lexicon(c) {
                if let Some(prev) = seen.insert(p, c) {
                    panic!("{p:?} in {prev} and {c}");
                }
            }
        }
    }

    #[test]
    fn reports_align_and_are_deterministic() {
        let a = report_corpus(50, 3).unwrap();
        assert_eq!(a, report_corpus(50, 3).unwrap());
        for s in &a {
            assert_eq!(s.tokens.len(), s.tags.len());
            assert!(is_valid_bio(&s.tags));
        }
    }

    #[test]
    fn annotated_reports_match_corpus() {
        let start = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
        let recs = annotated_reports(20, 9, start).unwrap();
        let corpus = report_corpus(20, 9).unwrap();
        for (r, s) in recs.iter().zip(&corpus) {
            assert_eq!(TaggedSentence::from_annotated(r).unwrap(), *s);
        }
    }

    #[test]
    fn pos_sentences_are_consistent() {
        let c = pos_corpus(40, 1).unwrap();
        assert!(c.iter().map(|s| s.tokens.len()).sum::<usize>() > 200);
        assert!(c.iter().any(|s| s.tokens.contains(&"<number>".to_string())));
    }

    #[test]
    fn tweet_stream_shape() {
        let tweets = annotated_tweets(&TweetStreamConfig::default()).unwrap();
        assert_eq!(tweets.len(), 200);
        assert!(tweets.windows(2).all(|w| w[0].tweet.created_at < w[1].tweet.created_at));
        assert!(tweets.iter().any(|t| t.labels.contains(&EventClass::Other)));
        assert!(tweets.iter().any(|t| t.labels.len() > 1));
        assert!(tweets.iter().any(|t| t.tweet.text.contains(" @ ")));
        assert!(tweets.iter().any(|t| t.tweet.geo.is_some()));
        assert_eq!(tweets, annotated_tweets(&TweetStreamConfig::default()).unwrap());
    }

    #[test]
    fn token_f1_counts() {
        use BioTag::*;
        let g = vec![vec![Begin(EventClass::Food), Outside, Begin(EventClass::Crime)]];
        assert_eq!(token_f1(&g, &g), 1.0);
        let p = vec![vec![Begin(EventClass::Food), Begin(EventClass::Sport), Outside]];
        // tp 1, fp 1, fn 1
        assert!((token_f1(&g, &p) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gazetteer_covers_every_place() {
        let g = gazetteer();
        for &(name, ..) in PLACES {
            assert!(g.lookup(name).is_some(), "{name}");
        }
        let parsed = Gazetteer::from_reader(gazetteer_csv().as_bytes()).unwrap();
        assert_eq!(parsed, g);
    }
}
