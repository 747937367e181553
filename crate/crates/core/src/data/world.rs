//! Seeded world generation.
//!
//! Documents are composed from the bundled pools. Queries are composed from
//! a target document (entity keywords for structured verticals, templated
//! questions with optional synonym substitution for help), shown in a
//! simulated result list, and clicked under a position-biased model.
//! Sessions chain reformulations (add, drop, or replace one term) a few
//! seconds to minutes apart.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::data::pools::{self, WordPools};
use crate::data::{DocumentRecord, GeneratorConfig, QueryLogEntry, Vertical};
use crate::error::Result;
use crate::nn::{seeded_rng, Rng as Prng};
use crate::text::{tokenize, EntityType, LexiconSet};

/// Probability of a click on a relevant result at 1-based rank `r`.
pub fn click_probability(rank: usize) -> f64 {
    0.7 * 0.85f64.powi(rank as i32 - 1)
}

pub const RESULTS_SHOWN: usize = 10;

#[derive(Debug, Clone)]
pub struct World {
    pub lexicons: LexiconSet,
    pub docs: Vec<DocumentRecord>,
    pub log: Vec<QueryLogEntry>,
}

/// Entity mention in an annotated query, token offsets end-exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub entity: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedQuery {
    pub raw: String,
    pub spans: Vec<EntitySpan>,
}

/// Which half of every entity pool to draw from; `Train` and `Test` are
/// disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityPartition {
    All,
    Train,
    Test,
}

impl EntityPartition {
    fn admits(self, index: usize) -> bool {
        match self {
            EntityPartition::All => true,
            EntityPartition::Train => index % 2 == 0,
            EntityPartition::Test => index % 2 == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    text: String,
    entity: Option<EntityType>,
    /// Content words must appear in a relevant document.
    content: bool,
}

impl Segment {
    fn entity(t: EntityType, text: &str) -> Self {
        Segment {
            text: text.to_string(),
            entity: Some(t),
            content: true,
        }
    }

    fn topic(text: &str) -> Self {
        Segment {
            text: text.to_string(),
            entity: None,
            content: true,
        }
    }

    fn word(text: &str) -> Self {
        Segment {
            text: text.to_string(),
            entity: None,
            content: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct QueryPlan {
    vertical: Vertical,
    segments: Vec<Segment>,
    /// Help questions carry their (action, object) concept.
    concept: Option<(usize, usize)>,
}

impl QueryPlan {
    fn content_tokens(&self) -> Vec<String> {
        self.segments
            .iter()
            .filter(|s| s.content)
            .flat_map(|s| tokenize(&s.text))
            .collect()
    }

    fn render<R: Rng>(&self, rng: &mut R) -> String {
        let capitalize = rng.random_bool(0.3);
        self.segments
            .iter()
            .map(|s| match s.entity {
                Some(EntityType::FirstName | EntityType::LastName | EntityType::Company)
                    if capitalize =>
                {
                    title_case(&s.text)
                }
                _ => s.text.clone(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn canonical(&self) -> String {
        self.segments
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default)]
struct DocInfo {
    entities: Vec<(EntityType, String)>,
    topic: Option<String>,
    marker: Option<String>,
    concept: Option<(usize, usize)>,
}

impl DocInfo {
    fn first(&self, t: EntityType) -> Option<&str> {
        self.entities
            .iter()
            .find(|(e, _)| *e == t)
            .map(|(_, s)| s.as_str())
    }
}

struct Generator<'a> {
    cfg: &'a GeneratorConfig,
    rng: Prng,
    pools: WordPools,
    docs: Vec<DocumentRecord>,
    infos: Vec<DocInfo>,
    by_vertical: BTreeMap<Vertical, Vec<usize>>,
    postings: HashMap<(Vertical, String), Vec<usize>>,
    by_concept: HashMap<(usize, usize), usize>,
}

/// Builds lexicons, documents, and a query log; a pure function of `cfg`.
pub fn generate_world(cfg: &GeneratorConfig) -> Result<World> {
    cfg.validate()?;
    let mut g = Generator {
        cfg,
        rng: seeded_rng(cfg.seed),
        pools: WordPools::bundled(),
        docs: Vec::new(),
        infos: Vec::new(),
        by_vertical: BTreeMap::new(),
        postings: HashMap::new(),
        by_concept: HashMap::new(),
    };
    g.make_documents();
    g.index_documents();
    let log = g.make_log();
    Ok(World {
        lexicons: lexicons_from_pools(&g.pools),
        docs: g.docs,
        log,
    })
}

pub fn lexicons_from_pools(pools: &WordPools) -> LexiconSet {
    let mut set = LexiconSet::new();
    for (t, pool) in entity_pools(pools) {
        for p in pool {
            set.insert(t, p);
        }
    }
    set
}

fn entity_pools(p: &WordPools) -> [(EntityType, &Vec<String>); 7] {
    [
        (EntityType::FirstName, &p.first_names),
        (EntityType::LastName, &p.last_names),
        (EntityType::Company, &p.companies),
        (EntityType::School, &p.schools),
        (EntityType::Geo, &p.geos),
        (EntityType::Title, &p.titles),
        (EntityType::Skill, &p.skills),
    ]
}

impl Generator<'_> {
    fn push_doc(&mut self, vertical: Vertical, fields: &[(&str, String)], info: DocInfo) {
        let id = self.docs.len() as u64 + 1;
        self.docs.push(DocumentRecord {
            id,
            vertical,
            fields: fields
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        });
        if let Some(c) = info.concept {
            self.by_concept.insert(c, self.infos.len());
        }
        self.infos.push(info);
    }

    fn pick(&mut self, pool: &[String]) -> String {
        pool.choose(&mut self.rng).expect("non-empty pool").clone()
    }

    fn pick_str(&mut self, pool: &[&str]) -> String {
        pool.choose(&mut self.rng).expect("non-empty pool").to_string()
    }

    fn make_documents(&mut self) {
        let pools = self.pools.clone();
        for _ in 0..self.cfg.people {
            let first = self.pick(&pools.first_names);
            let last = self.pick(&pools.last_names);
            let title = self.pick(&pools.titles);
            let company = self.pick(&pools.companies);
            let school = self.pick(&pools.schools);
            let geo = self.pick(&pools.geos);
            let n_skills = self.rng.random_range(2..=3);
            let skills: Vec<String> = pools
                .skills
                .choose_multiple(&mut self.rng, n_skills)
                .cloned()
                .collect();
            let mut entities = vec![
                (EntityType::FirstName, first.clone()),
                (EntityType::LastName, last.clone()),
                (EntityType::Title, title.clone()),
                (EntityType::Company, company.clone()),
                (EntityType::School, school.clone()),
                (EntityType::Geo, geo.clone()),
            ];
            entities.extend(skills.iter().map(|s| (EntityType::Skill, s.clone())));
            self.push_doc(
                Vertical::People,
                &[
                    ("name", title_case(&format!("{first} {last}"))),
                    ("title", title),
                    ("company", title_case(&company)),
                    ("skills", skills.join(", ")),
                    ("school", title_case(&school)),
                    ("geo", title_case(&geo)),
                ],
                DocInfo {
                    entities,
                    ..DocInfo::default()
                },
            );
        }
        for _ in 0..self.cfg.jobs {
            let title = self.pick(&pools.titles);
            let company = self.pick(&pools.companies);
            let geo = self.pick(&pools.geos);
            let skills: Vec<String> = pools
                .skills
                .choose_multiple(&mut self.rng, 2)
                .cloned()
                .collect();
            let mut entities = vec![
                (EntityType::Title, title.clone()),
                (EntityType::Company, company.clone()),
                (EntityType::Geo, geo.clone()),
            ];
            entities.extend(skills.iter().map(|s| (EntityType::Skill, s.clone())));
            self.push_doc(
                Vertical::Job,
                &[
                    ("title", title),
                    ("company", title_case(&company)),
                    ("geo", title_case(&geo)),
                    ("skills", skills.join(", ")),
                ],
                DocInfo {
                    entities,
                    ..DocInfo::default()
                },
            );
        }
        for i in 0..self.cfg.companies {
            let name = pools.companies[i % pools.companies.len()].clone();
            let industry = format!(
                "{} {}",
                self.pick_str(pools::TOPICS),
                self.pick_str(pools::FIELDS)
            );
            let geo = self.pick(&pools.geos);
            self.push_doc(
                Vertical::Company,
                &[
                    ("name", title_case(&name)),
                    ("industry", industry),
                    ("geo", title_case(&geo)),
                ],
                DocInfo {
                    entities: vec![(EntityType::Company, name), (EntityType::Geo, geo)],
                    ..DocInfo::default()
                },
            );
        }
        for i in 0..self.cfg.schools {
            let name = pools.schools[i % pools.schools.len()].clone();
            let geo = self.pick(&pools.geos);
            self.push_doc(
                Vertical::School,
                &[("name", title_case(&name)), ("geo", title_case(&geo))],
                DocInfo {
                    entities: vec![(EntityType::School, name), (EntityType::Geo, geo)],
                    ..DocInfo::default()
                },
            );
        }
        for _ in 0..self.cfg.groups {
            let topic = self.pick_str(pools::TOPICS);
            let marker = self.pick_str(pools::GROUP_MARKERS);
            let geo = self.pick(&pools.geos);
            let role = self.pick_str(pools::ROLES);
            self.push_doc(
                Vertical::Group,
                &[
                    ("title", format!("{topic} {marker} {geo}")),
                    (
                        "body",
                        format!("a {marker} for {topic} {role}s based in {geo} sharing ideas"),
                    ),
                ],
                DocInfo {
                    entities: vec![(EntityType::Geo, geo)],
                    topic: Some(topic),
                    marker: Some(marker),
                    concept: None,
                },
            );
        }
        for _ in 0..self.cfg.events {
            let topic = self.pick_str(pools::TOPICS);
            let marker = self.pick_str(pools::EVENT_MARKERS);
            let geo = self.pick(&pools.geos);
            let company = self.pick(&pools.companies);
            self.push_doc(
                Vertical::Event,
                &[
                    ("title", format!("{topic} {marker} {geo}")),
                    (
                        "body",
                        format!("join {topic} leaders in {geo} hosted by {company}"),
                    ),
                ],
                DocInfo {
                    entities: vec![(EntityType::Geo, geo), (EntityType::Company, company)],
                    topic: Some(topic),
                    marker: Some(marker),
                    concept: None,
                },
            );
        }
        for _ in 0..self.cfg.feeds {
            let topic = self.pick_str(pools::TOPICS);
            let skill = self.pick(&pools.skills);
            let company = self.pick(&pools.companies);
            let marker = self.pick_str(pools::FEED_MARKERS);
            self.push_doc(
                Vertical::Feed,
                &[
                    ("title", format!("{topic} {marker} on {skill}")),
                    (
                        "body",
                        format!("{company} shares {topic} {marker} about {skill} this week"),
                    ),
                ],
                DocInfo {
                    entities: vec![(EntityType::Skill, skill), (EntityType::Company, company)],
                    topic: Some(topic),
                    marker: Some(marker),
                    concept: None,
                },
            );
        }
        let mut concepts: Vec<(usize, usize)> = (0..pools::HELP_ACTIONS.len())
            .flat_map(|a| (0..pools::HELP_OBJECTS.len()).map(move |o| (a, o)))
            .collect();
        concepts.shuffle(&mut self.rng);
        for &(a, o) in concepts.iter().take(self.cfg.help_docs) {
            let action = pools::HELP_ACTIONS[a].0;
            let object = pools::HELP_OBJECTS[o].0;
            let filler: Vec<&str> = pools::HELP_FILLER
                .choose_multiple(&mut self.rng, 6)
                .copied()
                .collect();
            let title = match self.rng.random_range(0..3) {
                0 => format!("How to {action} your {object}"),
                1 => format!("{} your {object}", title_case(action)),
                _ => format!("{} {object} settings", title_case(action)),
            };
            let body = format!(
                "{} {} {action} {} {object} {} {} {}",
                filler[0], filler[1], filler[2], filler[3], filler[4], filler[5]
            );
            self.push_doc(
                Vertical::Help,
                &[("title", title), ("body", body)],
                DocInfo {
                    concept: Some((a, o)),
                    ..DocInfo::default()
                },
            );
        }
    }

    fn index_documents(&mut self) {
        for (i, d) in self.docs.iter().enumerate() {
            self.by_vertical.entry(d.vertical).or_default().push(i);
            let unique: HashSet<String> = d.all_tokens().into_iter().collect();
            let mut unique: Vec<String> = unique.into_iter().collect();
            unique.sort();
            for t in unique {
                self.postings.entry((d.vertical, t)).or_default().push(i);
            }
        }
    }

    fn relevant(&self, plan: &QueryPlan) -> Vec<usize> {
        if let Some(c) = plan.concept {
            return self.by_concept.get(&c).copied().into_iter().collect();
        }
        let toks = plan.content_tokens();
        if toks.is_empty() {
            return Vec::new();
        }
        let mut lists: Vec<&Vec<usize>> = Vec::new();
        for t in &toks {
            match self.postings.get(&(plan.vertical, t.clone())) {
                Some(l) => lists.push(l),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        lists[0]
            .iter()
            .copied()
            .filter(|d| lists[1..].iter().all(|l| l.binary_search(d).is_ok()))
            .collect()
    }

    /// Docs sharing part of the query but not relevant.
    fn near_misses(&self, plan: &QueryPlan, exclude: &HashSet<usize>) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        if let Some((a, o)) = plan.concept {
            for (&(ca, co), &d) in &self.by_concept {
                if (ca == a) != (co == o) && !exclude.contains(&d) {
                    out.push(d);
                }
            }
        } else {
            for t in plan.content_tokens() {
                if let Some(l) = self.postings.get(&(plan.vertical, t)) {
                    out.extend(l.iter().filter(|d| !exclude.contains(d)));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn compose(&mut self, vertical: Vertical, doc: usize) -> QueryPlan {
        let info = self.infos[doc].clone();
        let e = |t: EntityType| info.first(t).map(|s| Segment::entity(t, s));
        use EntityType::*;
        let segments: Vec<Segment> = match vertical {
            Vertical::People => {
                let templates: [&[EntityType]; 8] = [
                    &[FirstName, LastName],
                    &[FirstName, LastName, Company],
                    &[FirstName, LastName, Geo],
                    &[FirstName, LastName, Title],
                    &[Title, Company],
                    &[FirstName, Company],
                    &[LastName, Title],
                    &[FirstName, LastName, School],
                ];
                let t = templates.choose(&mut self.rng).unwrap();
                t.iter().filter_map(|&t| e(t)).collect()
            }
            Vertical::Job => {
                let marker = Segment::word(pools::JOB_MARKERS.choose(&mut self.rng).unwrap());
                let skill = info
                    .entities
                    .iter()
                    .filter(|(t, _)| *t == Skill)
                    .map(|(_, s)| Segment::entity(Skill, s))
                    .collect::<Vec<_>>();
                match self.rng.random_range(0..5) {
                    0 => vec![e(Title).unwrap(), marker],
                    1 => vec![e(Title).unwrap(), e(Geo).unwrap()],
                    2 => vec![e(Title).unwrap(), e(Company).unwrap(), marker],
                    3 => vec![skill.choose(&mut self.rng).unwrap().clone(), marker],
                    _ => vec![e(Title).unwrap(), marker, Segment::word("in"), e(Geo).unwrap()],
                }
            }
            Vertical::Company => {
                if self.rng.random_bool(0.7) {
                    vec![e(Company).unwrap()]
                } else {
                    vec![e(Company).unwrap(), e(Geo).unwrap()]
                }
            }
            Vertical::School => {
                if self.rng.random_bool(0.7) {
                    vec![e(School).unwrap()]
                } else {
                    vec![e(School).unwrap(), e(Geo).unwrap()]
                }
            }
            Vertical::Group | Vertical::Event => {
                let topic = Segment::topic(info.topic.as_deref().unwrap());
                let marker = Segment::word(info.marker.as_deref().unwrap());
                if self.rng.random_bool(0.5) {
                    vec![topic, marker]
                } else {
                    vec![topic, marker, e(Geo).unwrap()]
                }
            }
            Vertical::Feed => {
                let marker = Segment::word(info.marker.as_deref().unwrap());
                if self.rng.random_bool(0.5) {
                    vec![Segment::topic(info.topic.as_deref().unwrap()), marker]
                } else {
                    vec![e(Skill).unwrap(), marker]
                }
            }
            Vertical::Help => {
                let (a, o) = info.concept.unwrap();
                return self.help_plan(a, o);
            }
        };
        QueryPlan {
            vertical,
            segments,
            concept: None,
        }
    }

    fn help_plan(&mut self, a: usize, o: usize) -> QueryPlan {
        let (action, action_syn) = pools::HELP_ACTIONS[a];
        let (object, object_syn) = pools::HELP_OBJECTS[o];
        let rate = self.cfg.paraphrase_rate;
        let verb = if self.rng.random_bool(rate) {
            action_syn.choose(&mut self.rng).unwrap()
        } else {
            action
        };
        let noun = if self.rng.random_bool(rate) {
            object_syn.choose(&mut self.rng).unwrap()
        } else {
            object
        };
        let words: Vec<&str> = match self.rng.random_range(0..4) {
            0 => vec!["how to", verb, "my", noun],
            1 => vec![verb, noun],
            2 => vec!["i want to", verb, "my", noun],
            _ => vec!["cannot", verb, noun],
        };
        QueryPlan {
            vertical: Vertical::Help,
            segments: words
                .into_iter()
                .map(|w| {
                    if w == verb || w == noun {
                        Segment::topic(w)
                    } else {
                        Segment::word(w)
                    }
                })
                .collect(),
            concept: Some((a, o)),
        }
    }

    fn reformulate(&mut self, plan: &QueryPlan, doc: Option<usize>) -> Option<QueryPlan> {
        if let Some((a, o)) = plan.concept {
            // re-ask the same question in different words
            let next = self.help_plan(a, o);
            return (next.canonical() != plan.canonical()).then_some(next);
        }
        let mut next = plan.clone();
        let op = self.rng.random_range(0..3);
        let content: Vec<usize> = (0..next.segments.len())
            .filter(|&i| next.segments[i].content)
            .collect();
        let done = match op {
            0 => {
                let present: HashSet<EntityType> =
                    next.segments.iter().filter_map(|s| s.entity).collect();
                let options: Vec<(EntityType, String)> = doc
                    .map(|d| self.infos[d].entities.clone())
                    .unwrap_or_default()
                    .into_iter()
                    .filter(|(t, _)| {
                        !present.contains(t)
                            && matches!(t, EntityType::Company | EntityType::Geo | EntityType::Title | EntityType::School)
                    })
                    .collect();
                match options.choose(&mut self.rng) {
                    Some((t, s)) => {
                        next.segments.push(Segment::entity(*t, s));
                        true
                    }
                    None => false,
                }
            }
            1 if content.len() >= 2 => {
                let i = *content.choose(&mut self.rng).unwrap();
                next.segments.remove(i);
                true
            }
            1 if next.segments.len() > content.len() && !content.is_empty() => {
                let words: Vec<usize> = (0..next.segments.len())
                    .filter(|&i| !next.segments[i].content)
                    .collect();
                let i = *words.choose(&mut self.rng).unwrap();
                next.segments.remove(i);
                true
            }
            _ => false,
        };
        if !done {
            let i = *content.choose(&mut self.rng)?;
            let seg = next.segments[i].clone();
            next.segments[i] = self.replacement(&seg);
        }
        (next.canonical() != plan.canonical()).then_some(next)
    }

    fn replacement(&mut self, seg: &Segment) -> Segment {
        match seg.entity {
            Some(EntityType::Title) => {
                let mut toks: Vec<String> = seg.text.split(' ').map(str::to_string).collect();
                let last = toks.len() - 1;
                toks[last] = self.pick_str(pools::ROLES);
                Segment::entity(EntityType::Title, &toks.join(" "))
            }
            Some(t) => {
                let pool = entity_pools(&self.pools)[t.index()].1.clone();
                Segment::entity(t, &self.pick(&pool))
            }
            None => Segment::topic(&self.pick_str(pools::TOPICS)),
        }
    }

    fn typo(&mut self, text: &str) -> String {
        let mut words: Vec<String> = text.split(' ').map(str::to_string).collect();
        let long: Vec<usize> = (0..words.len())
            .filter(|&i| words[i].chars().count() >= 4)
            .collect();
        if let Some(&i) = long.choose(&mut self.rng) {
            let mut chars: Vec<char> = words[i].chars().collect();
            let k = self.rng.random_range(0..chars.len() - 1);
            chars.swap(k, k + 1);
            words[i] = chars.into_iter().collect();
        }
        words.join(" ")
    }

    fn entry(&mut self, plan: &QueryPlan, target: Option<usize>, user: u64, ts: u64) -> QueryLogEntry {
        let relevant: HashSet<usize> = self.relevant(plan).into_iter().collect();
        let mut exclude = relevant.clone();
        if let Some(t) = target {
            exclude.insert(t);
        }
        let mut negatives = self.near_misses(plan, &exclude);
        negatives.shuffle(&mut self.rng);
        negatives.truncate(RESULTS_SHOWN / 2);
        let pool = self.by_vertical[&plan.vertical].clone();
        let mut shown_set: HashSet<usize> = negatives.iter().copied().collect();
        let slots = RESULTS_SHOWN - usize::from(target.is_some());
        let mut guard = 0;
        while negatives.len() < slots.min(pool.len() - exclude.len().min(pool.len())) && guard < 1000 {
            guard += 1;
            let d = *pool.choose(&mut self.rng).unwrap();
            if !exclude.contains(&d) && shown_set.insert(d) {
                negatives.push(d);
            }
        }
        negatives.shuffle(&mut self.rng);
        let mut shown = negatives;
        if let Some(t) = target {
            let rank = if self.rng.random_bool(0.4) {
                0
            } else {
                self.rng.random_range(0..=shown.len())
            };
            shown.insert(rank, t);
        }

        let mut clicked = None;
        for (r, &d) in shown.iter().enumerate() {
            let p = if Some(d) == target || relevant.contains(&d) {
                click_probability(r + 1)
            } else {
                self.cfg.noise_click_rate
            };
            if self.rng.random_bool(p) {
                clicked = Some(d);
                break;
            }
        }
        let satisfied = match clicked {
            Some(d) if Some(d) == target || relevant.contains(&d) => {
                self.rng.random_bool(self.cfg.sat_rate)
            }
            _ => false,
        };
        let mut query = plan.render(&mut self.rng);
        if self.rng.random_bool(self.cfg.typo_rate) {
            query = self.typo(&query);
        }
        QueryLogEntry {
            timestamp: ts,
            user,
            query,
            clicked_doc: clicked.map(|d| self.docs[d].id),
            clicked_vertical: clicked.map(|d| self.docs[d].vertical),
            shown: shown.iter().map(|&d| self.docs[d].id).collect(),
            satisfied,
        }
    }

    fn pick_vertical(&mut self) -> Vertical {
        if self.cfg.help_share > 0.0 && self.rng.random_bool(self.cfg.help_share) {
            return Vertical::Help;
        }
        const WEIGHTS: [(Vertical, u32); 7] = [
            (Vertical::People, 40),
            (Vertical::Job, 22),
            (Vertical::Company, 10),
            (Vertical::School, 7),
            (Vertical::Group, 7),
            (Vertical::Event, 7),
            (Vertical::Feed, 7),
        ];
        WEIGHTS
            .choose_weighted(&mut self.rng, |w| w.1)
            .expect("static weights")
            .0
    }

    fn make_log(&mut self) -> Vec<QueryLogEntry> {
        let mut clocks: Vec<u64> = (0..self.cfg.users)
            .map(|_| self.rng.random_range(0..86_400))
            .collect();
        let mut log = Vec::with_capacity(self.cfg.queries);
        while log.len() < self.cfg.queries {
            let u = self.rng.random_range(0..self.cfg.users);
            clocks[u] += self.rng.random_range(900..20_000);
            let vertical = self.pick_vertical();
            let doc = *self.by_vertical[&vertical].choose(&mut self.rng).unwrap();
            let mut plan = self.compose(vertical, doc);
            let mut target = Some(doc);
            log.push(self.entry(&plan, target, u as u64 + 1, clocks[u]));
            let mut len = 1;
            while len < 4 && log.len() < self.cfg.queries && self.rng.random_bool(self.cfg.reformulation_rate) {
                let Some(next) = self.reformulate(&plan, target) else {
                    break;
                };
                let rel = self.relevant(&next);
                target = match target {
                    Some(t) if rel.contains(&t) => Some(t),
                    _ => rel.choose(&mut self.rng).copied(),
                };
                clocks[u] += self.rng.random_range(5..=300);
                log.push(self.entry(&next, target, u as u64 + 1, clocks[u]));
                plan = next;
                len += 1;
            }
        }
        log.sort_by_key(|e| (e.timestamp, e.user));
        log
    }
}

/// Annotated keyword queries for tagger training and evaluation, composed
/// from entities of the requested partition.
pub fn generate_tagged_queries(n: usize, seed: u64, partition: EntityPartition) -> Vec<AnnotatedQuery> {
    let pools = WordPools::bundled();
    let mut rng = seeded_rng(seed);
    let filtered: Vec<(EntityType, Vec<String>)> = entity_pools(&pools)
        .into_iter()
        .map(|(t, pool)| {
            let items = pool
                .iter()
                .enumerate()
                .filter(|(i, _)| partition.admits(*i))
                .map(|(_, s)| s.clone())
                .collect();
            (t, items)
        })
        .collect();
    let pick = |t: EntityType, rng: &mut Prng| -> Segment {
        Segment::entity(t, filtered[t.index()].1.choose(rng).unwrap())
    };
    use EntityType::*;
    (0..n)
        .map(|_| {
            let word = |w: &str| Segment::word(w);
            let segments: Vec<Segment> = match rng.random_range(0..10) {
                0 => vec![pick(FirstName, &mut rng), pick(LastName, &mut rng)],
                1 => vec![pick(FirstName, &mut rng), pick(LastName, &mut rng), pick(Company, &mut rng)],
                2 => vec![pick(FirstName, &mut rng), pick(LastName, &mut rng), pick(Geo, &mut rng)],
                3 => vec![pick(Title, &mut rng), pick(Company, &mut rng)],
                4 => vec![pick(Title, &mut rng), word(pools::JOB_MARKERS.choose(&mut rng).unwrap()), word("in"), pick(Geo, &mut rng)],
                5 => vec![pick(Skill, &mut rng), word(pools::JOB_MARKERS.choose(&mut rng).unwrap())],
                6 => vec![pick(School, &mut rng), pick(Geo, &mut rng)],
                7 => vec![pick(FirstName, &mut rng), pick(Title, &mut rng), word("at"), pick(Company, &mut rng)],
                8 => vec![pick(LastName, &mut rng), pick(School, &mut rng)],
                _ => vec![pick(Company, &mut rng), pick(Skill, &mut rng), word(pools::JOB_MARKERS.choose(&mut rng).unwrap())],
            };
            let plan = QueryPlan {
                vertical: Vertical::People,
                segments,
                concept: None,
            };
            let raw = plan.render(&mut rng);
            let mut spans = Vec::new();
            let mut pos = 0;
            for s in &plan.segments {
                let n = tokenize(&s.text).len();
                if let Some(entity) = s.entity {
                    spans.push(EntitySpan {
                        start: pos,
                        end: pos + n,
                        entity,
                    });
                }
                pos += n;
            }
            AnnotatedQuery { raw, spans }
        })
        .collect()
}
