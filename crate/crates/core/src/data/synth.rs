//! Template-based synthetic clinical notes with exact gold PHI spans.
//!
//! Sentences come from two pools: templates with PHI slots and templates
//! without any. A running controller picks from the PHI pool whenever the
//! corpus-wide PHI token fraction is below the configured density, so the
//! realised density tracks the target (up to the densest template).

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{token_labels, DataError, LabeledDocument, PhiCategory, PhiSpan};
use crate::text::tokenize;

/// Relative frequency of each category when choosing PHI-bearing templates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CategoryWeights {
    pub name: f64,
    pub profession: f64,
    pub location: f64,
    pub age: f64,
    pub date: f64,
    pub contact: f64,
    pub id: f64,
}

impl Default for CategoryWeights {
    fn default() -> Self {
        Self {
            name: 1.0,
            profession: 1.0,
            location: 1.0,
            age: 1.0,
            date: 1.0,
            contact: 1.0,
            id: 1.0,
        }
    }
}

impl CategoryWeights {
    pub fn get(&self, c: PhiCategory) -> f64 {
        match c {
            PhiCategory::Name => self.name,
            PhiCategory::Profession => self.profession,
            PhiCategory::Location => self.location,
            PhiCategory::Age => self.age,
            PhiCategory::Date => self.date,
            PhiCategory::Contact => self.contact,
            PhiCategory::Id => self.id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_documents: usize,
    /// Inclusive range of sentences per document.
    pub sentences_per_doc: (usize, usize),
    pub seed: u64,
    /// Target fraction of tokens that are PHI, in `[0, 1)`.
    pub phi_density: f64,
    pub category_weights: CategoryWeights,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_documents: 1000,
            sentences_per_doc: (3, 6),
            seed: 0,
            phi_density: 0.15,
            category_weights: CategoryWeights::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let (lo, hi) = self.sentences_per_doc;
        if lo == 0 || lo > hi {
            return Err(DataError::Config(format!("sentences_per_doc must satisfy 1 <= min <= max, got ({lo}, {hi})")));
        }
        if !(0.0..1.0).contains(&self.phi_density) {
            return Err(DataError::Config(format!("phi_density must lie in [0, 1), got {}", self.phi_density)));
        }
        let w: Vec<f64> = PhiCategory::ALL.iter().map(|&c| self.category_weights.get(c)).collect();
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || w.iter().all(|&x| x == 0.0) {
            return Err(DataError::Config("category weights must be non-negative and not all zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Patient,
    First,
    Last,
    Doctor,
    Profession,
    Hospital,
    City,
    Street,
    Age,
    Date,
    Phone,
    Email,
    Mrn,
    Ssn,
    Account,
    // non-PHI fillers
    Vital,
    BloodPressure,
    Dose,
    Small,
    Decimal,
    Temperature,
}

impl Slot {
    fn parse(name: &str) -> Slot {
        match name {
            "PATIENT" => Slot::Patient,
            "FIRST" => Slot::First,
            "LAST" => Slot::Last,
            "DOCTOR" => Slot::Doctor,
            "PROFESSION" => Slot::Profession,
            "HOSPITAL" => Slot::Hospital,
            "CITY" => Slot::City,
            "STREET" => Slot::Street,
            "AGE" => Slot::Age,
            "DATE" => Slot::Date,
            "PHONE" => Slot::Phone,
            "EMAIL" => Slot::Email,
            "MRN" => Slot::Mrn,
            "SSN" => Slot::Ssn,
            "ACCOUNT" => Slot::Account,
            "VITAL" => Slot::Vital,
            "BP" => Slot::BloodPressure,
            "DOSE" => Slot::Dose,
            "SMALL" => Slot::Small,
            "DEC" => Slot::Decimal,
            "TEMP" => Slot::Temperature,
            other => panic!("unknown template slot {other}"),
        }
    }

    fn phi(self) -> Option<(PhiCategory, &'static str)> {
        use PhiCategory::*;
        Some(match self {
            Slot::Patient | Slot::First | Slot::Last => (Name, "PATIENT"),
            Slot::Doctor => (Name, "DOCTOR"),
            Slot::Profession => (Profession, "PROFESSION"),
            Slot::Hospital => (Location, "HOSPITAL"),
            Slot::City => (Location, "CITY"),
            Slot::Street => (Location, "STREET"),
            Slot::Age => (Age, "AGE"),
            Slot::Date => (Date, "DATE"),
            Slot::Phone => (Contact, "PHONE"),
            Slot::Email => (Contact, "EMAIL"),
            Slot::Mrn => (Id, "MEDICALRECORD"),
            Slot::Ssn => (Id, "SSN"),
            Slot::Account => (Id, "ACCOUNT"),
            _ => return None,
        })
    }
}

const PHI_TEMPLATES: &[&str] = &[
    "Patient {PATIENT} is a {AGE} year old {PROFESSION} admitted on {DATE}.",
    "{PATIENT} was seen by Dr. {DOCTOR} at {HOSPITAL}.",
    "MRN: {MRN}.",
    "Admission date: {DATE}.",
    "Discharge date: {DATE}.",
    "The patient can be reached at {PHONE}.",
    "Please contact Dr. {DOCTOR} at {PHONE} with any questions.",
    "Mr. {LAST} is a {AGE} year old man with a history of hypertension.",
    "Mrs. {LAST} reports worsening shortness of breath since {DATE}.",
    "She lives at {STREET} in {CITY} with her daughter.",
    "He works as a {PROFESSION} in {CITY}.",
    "Referred from {HOSPITAL} for further evaluation.",
    "Email correspondence to {EMAIL} was sent.",
    "Social security number {SSN} on file.",
    "Follow up in clinic with Dr. {DOCTOR} on {DATE}.",
    "Age: {AGE}.",
    "Ms. {PATIENT} denies chest pain.",
    "Transferred to {HOSPITAL} in {CITY} on {DATE}.",
    "Account number {ACCOUNT} verified at registration.",
    "Her son {FIRST} will assist with medications.",
    "Occupation: {PROFESSION}.",
    "Dictated by {DOCTOR}, MD on {DATE}.",
];

const PLAIN_TEMPLATES: &[&str] = &[
    "Blood pressure was {BP} and heart rate {VITAL}.",
    "Continue metformin {DOSE} mg twice daily.",
    "No acute distress noted on examination.",
    "Lungs are clear to auscultation bilaterally.",
    "Patient denies fever, chills or night sweats.",
    "Plan to repeat labs in {SMALL} weeks.",
    "Hemoglobin A1c was {DEC} percent.",
    "Abdomen is soft and non tender.",
    "Start lisinopril {DOSE} mg daily for blood pressure control.",
    "Temperature {TEMP} degrees, respiratory rate {SMALL}.",
    "The patient tolerated the procedure well.",
    "Chest x ray showed no acute process.",
    "We will continue to monitor renal function closely.",
    "Glucose was {VITAL} this morning.",
    "Pain is rated {SMALL} out of 10.",
    "Patient was counseled on diet and exercise.",
];

const FIRST_NAMES: &[&str] = &[
    "James", "Maria", "Robert", "Linda", "Michael", "Susan", "David", "Karen", "Thomas", "Nancy", "Daniel", "Lisa",
    "Steven", "Sandra", "Kevin", "Donna", "Brian", "Carol", "George", "Sharon", "Edward", "Michelle", "Ronald",
    "Laura", "Timothy", "Sarah", "Jason", "Kimberly", "Jeffrey", "Deborah", "Ryan", "Jessica", "Gary", "Shirley",
    "Jacob", "Cynthia", "Nicholas", "Angela", "Eric", "Melissa", "Jonathan", "Brenda", "Larry", "Amy", "Justin",
    "Anna", "Scott", "Rebecca", "Brandon", "Virginia", "Raymond", "Kathleen", "Gregory", "Pamela", "Samuel",
    "Martha", "Patrick", "Debra", "Alexander", "Amanda", "Matthew",
];

const LAST_NAMES: &[&str] = &[
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis", "Rodriguez", "Martinez",
    "Hernandez", "Lopez", "Gonzalez", "Wilson", "Anderson", "Taylor", "Moore", "Jackson", "Martin", "Lee", "Perez",
    "Thompson", "Harris", "Sanchez", "Clark", "Ramirez", "Lewis", "Robinson", "Walker", "Allen", "Wright", "Torres",
    "Nguyen", "Flores", "Adams", "Nelson", "Baker", "Rivera", "Campbell", "Mitchell", "Carter", "Roberts", "Edelson",
    "Kowalski", "Okafor", "Haddad", "Novak", "Petrov", "Schmidt", "Yamamoto", "Larsen", "Dubois", "Rossi", "Fischer",
];

const CITIES: &[&str] = &[
    "Springfield", "Riverside", "Fairview", "Madison", "Georgetown", "Salem", "Franklin", "Clinton", "Greenville",
    "Bristol", "Arlington", "Ashland", "Burlington", "Manchester", "Oxford", "Winnipeg", "Houston", "Denver",
    "Portland", "Austin", "Boston", "Phoenix", "Dayton", "Toledo", "San Antonio", "New Haven", "El Paso",
];

const SAINTS: &[&str] = &["Mary", "Luke", "Joseph", "Vincent", "Jude", "Francis"];
const STREET_NAMES: &[&str] = &[
    "Oak", "Maple", "Cedar", "Elm", "Pine", "Washington", "Lincoln", "Park", "Lake", "Hillcrest", "Sunset", "Birch",
];
const STREET_KINDS: &[&str] = &["Street", "Avenue", "Road", "Lane", "Drive", "Court"];

const PROFESSIONS: &[&str] = &[
    "teacher", "carpenter", "electrician", "accountant", "plumber", "engineer", "firefighter", "librarian",
    "mechanic", "farmer", "lawyer", "pharmacist", "chef", "pilot", "welder", "truck driver", "software developer",
    "police officer", "retired machinist", "bus driver",
];

const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];
const MONTH_ABBR: &[&str] = &["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"];
const EMAIL_DOMAINS: &[&str] = &["mail.com", "example.org", "clinicmail.net", "inbox.us"];
const DOSES: &[u32] = &[5, 10, 20, 25, 40, 50, 100, 250, 500, 850, 1000];

fn digits<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect()
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &'a [&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty list")
}

fn fill<R: Rng>(slot: Slot, rng: &mut R) -> String {
    match slot {
        Slot::Patient => match rng.random_range(0..3) {
            0 => pick(rng, LAST_NAMES).to_string(),
            _ => format!("{} {}", pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES)),
        },
        Slot::First => pick(rng, FIRST_NAMES).to_string(),
        Slot::Last => pick(rng, LAST_NAMES).to_string(),
        Slot::Doctor => match rng.random_range(0..2) {
            0 => pick(rng, LAST_NAMES).to_string(),
            _ => format!("{} {}", pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES)),
        },
        Slot::Profession => pick(rng, PROFESSIONS).to_string(),
        Slot::Hospital => match rng.random_range(0..3) {
            0 => format!("{} General Hospital", pick(rng, CITIES)),
            1 => format!("St. {} Medical Center", pick(rng, SAINTS)),
            _ => format!("{} Memorial", pick(rng, LAST_NAMES)),
        },
        Slot::City => pick(rng, CITIES).to_string(),
        Slot::Street => format!(
            "{} {} {}",
            rng.random_range(1..10000),
            pick(rng, STREET_NAMES),
            pick(rng, STREET_KINDS)
        ),
        Slot::Age => rng.random_range(18..100).to_string(),
        Slot::Date => {
            let year = rng.random_range(1990..2025);
            let month = rng.random_range(1..13usize);
            let day = rng.random_range(1..29);
            match rng.random_range(0..5) {
                0 => format!("{month:02}/{day:02}/{year}"),
                1 => format!("{year}-{month:02}-{day:02}"),
                2 => format!("{} {day}, {year}", MONTHS[month - 1]),
                3 => format!("{day} {} {year}", MONTH_ABBR[month - 1]),
                _ => format!("{month}/{day}"),
            }
        }
        Slot::Phone => {
            let (a, b, c) = (digits(rng, 3), digits(rng, 3), digits(rng, 4));
            match rng.random_range(0..3) {
                0 => format!("({a}) {b}-{c}"),
                1 => format!("{a}-{b}-{c}"),
                _ => format!("{a}.{b}.{c}"),
            }
        }
        Slot::Email => format!(
            "{}.{}@{}",
            pick(rng, FIRST_NAMES).to_lowercase(),
            pick(rng, LAST_NAMES).to_lowercase(),
            pick(rng, EMAIL_DOMAINS)
        ),
        Slot::Mrn => {
            let n = rng.random_range(6..9);
            digits(rng, n)
        }
        Slot::Ssn => format!("{}-{}-{}", digits(rng, 3), digits(rng, 2), digits(rng, 4)),
        Slot::Account => format!("AC{}", digits(rng, 6)),
        Slot::Vital => rng.random_range(50..181).to_string(),
        Slot::BloodPressure => format!("{}/{}", rng.random_range(90..161), rng.random_range(50..101)),
        Slot::Dose => DOSES.choose(rng).expect("doses").to_string(),
        Slot::Small => rng.random_range(1..10).to_string(),
        Slot::Decimal => format!("{}.{}", rng.random_range(4..13), rng.random_range(0..10)),
        Slot::Temperature => format!("{}.{}", rng.random_range(97..104), rng.random_range(0..10)),
    }
}

#[derive(Debug)]
enum Piece {
    Literal(&'static str),
    Slot(Slot),
}

#[derive(Debug)]
struct Template {
    pieces: Vec<Piece>,
    categories: Vec<PhiCategory>,
}

impl Template {
    fn parse(src: &'static str) -> Self {
        let mut pieces = Vec::new();
        let mut rest = src;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                pieces.push(Piece::Literal(&rest[..open]));
            }
            let close = open + rest[open..].find('}').expect("closed slot");
            pieces.push(Piece::Slot(Slot::parse(&rest[open + 1..close])));
            rest = &rest[close + 1..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Literal(rest));
        }
        let categories = pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => s.phi().map(|(c, _)| c),
                Piece::Literal(_) => None,
            })
            .collect();
        Self { pieces, categories }
    }

    /// Selection weight: mean of slot category weights, zero if any slot's
    /// category is disabled.
    fn weight(&self, w: &CategoryWeights) -> f64 {
        if self.categories.is_empty() {
            return 1.0;
        }
        let ws: Vec<f64> = self.categories.iter().map(|&c| w.get(c)).collect();
        if ws.contains(&0.0) {
            0.0
        } else {
            ws.iter().sum::<f64>() / ws.len() as f64
        }
    }

    /// Appends the filled sentence to `text`, recording PHI spans.
    fn render<R: Rng>(&self, rng: &mut R, text: &mut String, spans: &mut Vec<PhiSpan>) {
        for piece in &self.pieces {
            match piece {
                Piece::Literal(s) => text.push_str(s),
                Piece::Slot(slot) => {
                    let value = fill(*slot, rng);
                    let start = text.len();
                    text.push_str(&value);
                    if let Some((category, subtype)) = slot.phi() {
                        spans.push(PhiSpan::new(start, text.len(), category).with_subtype(subtype));
                    }
                }
            }
        }
    }
}

fn weighted_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).expect("positive weight")
}

/// Generates `config.n_documents` notes, fully determined by `config.seed`.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<LabeledDocument>, DataError> {
    config.validate()?;
    let phi_templates: Vec<Template> = PHI_TEMPLATES.iter().map(|s| Template::parse(s)).collect();
    let plain_templates: Vec<Template> = PLAIN_TEMPLATES.iter().map(|s| Template::parse(s)).collect();
    let phi_weights: Vec<f64> = phi_templates.iter().map(|t| t.weight(&config.category_weights)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut phi_tokens = 0usize;
    let mut all_tokens = 0usize;
    let mut docs = Vec::with_capacity(config.n_documents);
    let (lo, hi) = config.sentences_per_doc;

    for d in 0..config.n_documents {
        let n_sentences = rng.random_range(lo..=hi);
        let mut text = String::new();
        let mut spans = Vec::new();
        for s in 0..n_sentences {
            if s > 0 {
                text.push(if rng.random_range(0..5) == 0 { '\n' } else { ' ' });
            }
            let want_phi = config.phi_density > 0.0
                && (phi_tokens as f64) < config.phi_density * (all_tokens.max(1) as f64);
            let template = if want_phi {
                &phi_templates[weighted_index(&mut rng, &phi_weights)]
            } else {
                plain_templates.choose(&mut rng).expect("templates")
            };
            let mut sentence = String::new();
            let mut local = Vec::new();
            template.render(&mut rng, &mut sentence, &mut local);
            let toks = tokenize(&sentence);
            all_tokens += toks.len();
            phi_tokens += token_labels(&toks, &local).iter().filter(|l| l.is_some()).count();
            let offset = text.len();
            text.push_str(&sentence);
            spans.extend(local.into_iter().map(|mut sp| {
                sp.start += offset;
                sp.end += offset;
                sp
            }));
        }
        docs.push(LabeledDocument {
            id: format!("synth-{d:05}"),
            text,
            phi_spans: spans,
        });
    }
    Ok(docs)
}
