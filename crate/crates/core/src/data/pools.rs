//! Bundled word pools for the synthetic professional-search world.
//!
//! Name-like pools are built from syllable inventories with a fixed internal
//! seed, so they are identical for every world; the world seed only controls
//! how entities are combined into documents and queries.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::nn::seeded_rng;

const POOL_SEED: u64 = 0x5eed_0f_9001;

const FIRST_ONSETS: &[&str] = &[
    "a", "be", "ca", "da", "e", "fa", "ga", "ha", "i", "ja", "ka", "la", "ma", "na", "o", "pa",
    "ra", "sa", "ta", "va", "wi", "ya", "za", "mi", "lu", "ro", "ni", "te", "so", "je",
];
const FIRST_CODAS: &[&str] = &[
    "na", "ra", "lie", "son", "ko", "mir", "den", "lia", "ren", "vin", "tha", "ris", "dan", "mel",
    "nor", "bel", "tin", "wen", "rik", "sha", "lo", "dra", "mon", "zel", "kai", "vi", "ne", "lan",
    "rin", "to", "xi", "dor", "fi", "gan", "hal",
];
const LAST_ONSETS: &[&str] = &[
    "brom", "cald", "dorn", "eld", "falk", "grim", "hart", "isk", "jarn", "kess", "lund", "mord",
    "nask", "ost", "pell", "quen", "rask", "stav", "thorn", "ulv", "vask", "wend", "yar", "zell",
    "brack", "crane", "drev", "fenn", "gorm", "holt",
];
const LAST_CODAS: &[&str] = &[
    "berg", "son", "ley", "wick", "er", "man", "ford", "stein", "ov", "ez", "ton", "dal", "ski",
    "holm", "ridge", "well", "worth", "by", "more", "ing", "ard", "ell", "ian", "quist", "ow",
    "aker", "vik", "lind", "mark", "sen", "dahl", "ic", "ek", "as",
];
const PLACE_ONSETS: &[&str] = &[
    "ar", "bel", "cor", "dal", "es", "fen", "gal", "hav", "ist", "kor", "lam", "mer", "nor",
    "ost", "pra", "qua", "ros", "sel", "tal", "urb", "ver", "wes", "xan", "yor", "zan",
];
const PLACE_CODAS: &[&str] = &[
    "ville", "ton", "ford", "mont", "haven", "dale", "grad", "polis", "mouth", "field", "bury",
    "wick", "stad", "holm", "caster", "port", "view", "minster",
];
const PLACE_PREFIXES: &[&str] = &["new", "san", "port", "lake", "fort", "east", "west"];
const BRAND_ONSETS: &[&str] = &[
    "zen", "vex", "qua", "lum", "nov", "ort", "pix", "syn", "tro", "ubi", "vel", "wyz", "xen",
    "yot", "kry", "flo", "gli", "hex", "ion", "jol", "kin", "mox", "nex", "opt", "plu",
];
const BRAND_CODAS: &[&str] = &[
    "tra", "ify", "ora", "lytics", "io", "ex", "ium", "a", "sys", "ly", "on", "ico", "tek",
    "gen", "verse", "nova", "loop", "path",
];
const COMPANY_SUFFIXES: &[&str] = &[
    "labs",
    "systems",
    "technologies",
    "networks",
    "software",
    "health",
    "capital",
    "media",
    "analytics",
    "robotics",
    "financial group",
    "data systems",
];

pub const SENIORITY: &[&str] = &["senior", "junior", "lead", "principal", "staff", "chief"];
pub const FIELDS: &[&str] = &[
    "software",
    "data",
    "product",
    "marketing",
    "sales",
    "research",
    "design",
    "hardware",
    "security",
    "finance",
    "operations",
    "machine learning",
    "network",
    "cloud",
    "mobile",
    "quality",
    "business",
    "content",
];
pub const ROLES: &[&str] = &[
    "engineer",
    "scientist",
    "manager",
    "analyst",
    "designer",
    "director",
    "consultant",
    "specialist",
    "architect",
    "recruiter",
    "developer",
    "strategist",
];

const BASE_SKILLS: &[&str] = &[
    "python", "java", "rust", "sql", "excel", "kotlin", "scala", "golang", "javascript",
    "typescript", "react", "docker", "kubernetes", "terraform", "tableau", "spark", "hadoop",
    "pandas", "tensorflow", "pytorch", "linux", "git", "swift", "figma", "photoshop", "salesforce",
    "accounting", "negotiation", "leadership", "recruiting", "copywriting", "statistics",
    "forecasting", "budgeting", "auditing", "networking", "cryptography", "ethics", "compliance",
    "logistics",
];
const SKILL_PHRASES: &[&str] = &[
    "project management",
    "machine learning",
    "data analysis",
    "public speaking",
    "product strategy",
    "user research",
    "cloud computing",
    "deep learning",
    "natural language processing",
    "computer vision",
    "supply chain management",
    "search engine optimization",
    "customer success",
    "financial modeling",
    "risk management",
    "digital marketing",
    "technical writing",
    "graphic design",
    "quality assurance",
    "business development",
];
const SKILL_QUALIFIERS: &[&str] = &[
    "advanced", "applied", "distributed", "embedded", "enterprise", "statistical", "visual",
    "agile", "mobile", "secure",
];

/// Topics used to name groups, events, and feed posts.
pub const TOPICS: &[&str] = &[
    "startup", "fintech", "healthcare", "robotics", "blockchain", "gaming", "climate", "education",
    "retail", "biotech", "aerospace", "energy", "privacy", "automation", "open source",
    "remote work", "diversity", "leadership", "analytics", "design",
];

/// Marker words that signal a non-people vertical in keyword queries.
pub const JOB_MARKERS: &[&str] = &["jobs", "job", "hiring", "openings", "careers"];
pub const GROUP_MARKERS: &[&str] = &["group", "network", "community", "professionals"];
pub const EVENT_MARKERS: &[&str] = &["summit", "conference", "meetup", "webinar"];
pub const FEED_MARKERS: &[&str] = &["news", "posts", "articles", "updates"];

/// Help-center vocabulary: canonical word and its paraphrases.
pub const HELP_ACTIONS: &[(&str, &[&str])] = &[
    ("hide", &["conceal", "mask"]),
    ("change", &["modify", "alter"]),
    ("delete", &["remove", "erase"]),
    ("reset", &["recover", "restore"]),
    ("export", &["download", "save"]),
    ("block", &["ban", "stop"]),
    ("share", &["send", "forward"]),
    ("edit", &["fix", "revise"]),
    ("verify", &["confirm", "validate"]),
    ("cancel", &["end", "terminate"]),
    ("add", &["insert", "include"]),
    ("find", &["locate", "search"]),
    ("report", &["flag", "notify"]),
    ("upgrade", &["improve", "boost"]),
    ("follow", &["track", "watch"]),
    ("close", &["deactivate", "shut"]),
];
pub const HELP_OBJECTS: &[(&str, &[&str])] = &[
    ("profile", &["page", "bio"]),
    ("password", &["passcode", "login"]),
    ("photo", &["picture", "image"]),
    ("email", &["mail", "inbox"]),
    ("connections", &["contacts", "network"]),
    ("subscription", &["membership", "plan"]),
    ("account", &["registration", "signup"]),
    ("notifications", &["alerts", "reminders"]),
    ("messages", &["chats", "conversations"]),
    ("resume", &["cv", "portfolio"]),
    ("invitations", &["requests", "invites"]),
    ("activity", &["history", "feed"]),
    ("recommendations", &["endorsements", "references"]),
    ("payment", &["billing", "card"]),
    ("settings", &["preferences", "options"]),
    ("updates", &["changes", "edits"]),
];
pub const HELP_FILLER: &[&str] = &[
    "you", "can", "this", "article", "explains", "the", "steps", "from", "menu", "select",
    "option", "then", "click", "save", "at", "any", "time", "under", "section", "page", "tab",
];

/// Every entity-type pool plus the shared topic lists.
#[derive(Debug, Clone)]
pub struct WordPools {
    pub first_names: Vec<String>,
    pub last_names: Vec<String>,
    pub companies: Vec<String>,
    pub titles: Vec<String>,
    pub skills: Vec<String>,
    pub schools: Vec<String>,
    pub geos: Vec<String>,
}

impl WordPools {
    /// Sizes: ~1000 first and ~1000 last names, 500 companies, 300 titles,
    /// 400 skills, 200 schools, 200 geos.
    pub fn bundled() -> Self {
        let mut rng = seeded_rng(POOL_SEED);
        let mut used: BTreeSet<String> = BTreeSet::new();
        // Reserve every fixed word so generated names never collide with it.
        for w in SENIORITY
            .iter()
            .chain(FIELDS)
            .chain(ROLES)
            .chain(BASE_SKILLS)
            .chain(SKILL_QUALIFIERS)
            .chain(TOPICS)
            .chain(JOB_MARKERS)
            .chain(GROUP_MARKERS)
            .chain(EVENT_MARKERS)
            .chain(FEED_MARKERS)
            .chain(PLACE_PREFIXES)
            .chain(COMPANY_SUFFIXES)
            .chain(SKILL_PHRASES)
        {
            for t in w.split(' ') {
                used.insert(t.to_string());
            }
        }
        for w in ["university", "college", "institute", "of", "technology", "state", "school"] {
            used.insert(w.to_string());
        }

        let first_names = coin(&mut rng, &mut used, FIRST_ONSETS, FIRST_CODAS, 1000);
        let last_names = coin(&mut rng, &mut used, LAST_ONSETS, LAST_CODAS, 1000);
        let brands = coin(&mut rng, &mut used, BRAND_ONSETS, BRAND_CODAS, 420);
        let places = coin(&mut rng, &mut used, PLACE_ONSETS, PLACE_CODAS, 300);

        let mut companies: Vec<String> = Vec::new();
        for (i, b) in brands.iter().enumerate() {
            if i % 3 == 0 {
                companies.push(b.clone());
            } else {
                companies.push(format!("{b} {}", COMPANY_SUFFIXES.choose(&mut rng).unwrap()));
            }
        }
        for b in brands.iter().cycle() {
            if companies.len() == 500 {
                break;
            }
            let extra = format!("{b} {}", COMPANY_SUFFIXES.choose(&mut rng).unwrap());
            if !companies.contains(&extra) {
                companies.push(extra);
            }
        }

        let mut titles = BTreeSet::new();
        for f in FIELDS {
            for r in ROLES {
                titles.insert(format!("{f} {r}"));
            }
        }
        let mut seniored: Vec<String> = Vec::new();
        while seniored.len() < 120 {
            let t = format!(
                "{} {} {}",
                SENIORITY.choose(&mut rng).unwrap(),
                FIELDS.choose(&mut rng).unwrap(),
                ROLES.choose(&mut rng).unwrap()
            );
            if !seniored.contains(&t) {
                seniored.push(t);
            }
        }
        let mut titles: Vec<String> = titles.into_iter().collect();
        // 216 field-role pairs; keep 180 of them plus the seniority variants.
        shuffle(&mut titles, &mut rng);
        titles.truncate(180);
        titles.extend(seniored);
        titles.sort();

        let mut skills: Vec<String> = BASE_SKILLS
            .iter()
            .chain(SKILL_PHRASES)
            .map(|s| s.to_string())
            .collect();
        let mut extra = Vec::new();
        for q in SKILL_QUALIFIERS {
            for s in BASE_SKILLS.iter().chain(SKILL_PHRASES) {
                if s.split(' ').count() < 4 {
                    extra.push(format!("{q} {s}"));
                }
            }
        }
        shuffle(&mut extra, &mut rng);
        skills.extend(extra.into_iter().take(400 - skills.len()));
        skills.sort();

        let mut geos: Vec<String> = Vec::new();
        for (i, p) in places.iter().take(200).enumerate() {
            if i % 4 == 0 {
                geos.push(format!("{} {p}", PLACE_PREFIXES.choose(&mut rng).unwrap()));
            } else {
                geos.push(p.clone());
            }
        }

        let mut schools: Vec<String> = Vec::new();
        for (i, p) in places.iter().skip(200).chain(brands.iter().skip(400)).enumerate() {
            let s = match i % 4 {
                0 => format!("university of {p}"),
                1 => format!("{p} state university"),
                2 => format!("{p} college"),
                _ => format!("{p} institute of technology"),
            };
            schools.push(s);
        }
        for g in geos.iter().filter(|g| !g.contains(' ')).take(200 - schools.len().min(200)) {
            schools.push(format!("{g} university"));
        }
        schools.truncate(200);

        WordPools {
            first_names,
            last_names,
            companies,
            titles,
            skills,
            schools,
            geos,
        }
    }
}

fn coin<R: Rng>(
    rng: &mut R,
    used: &mut BTreeSet<String>,
    onsets: &[&str],
    codas: &[&str],
    n: usize,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        let mut w = format!("{}{}", onsets.choose(rng).unwrap(), codas.choose(rng).unwrap());
        if attempts > n * 4 || rng.random_bool(0.3) {
            w.push_str(codas.choose(rng).unwrap());
        }
        if used.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn shuffle<T, R: Rng>(v: &mut [T], rng: &mut R) {
    use rand::seq::SliceRandom;
    v.shuffle(rng);
}
