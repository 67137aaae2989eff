//! Virtual participant demographics.
//!
//! Each census attribute is drawn independently from its own marginal
//! distribution. Names are drawn uniformly from a small pool keyed by
//! `(gender, ethnicity)`, then a state and one of its cities uniformly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{AgeClass, BanditContext, GenderClass};
use crate::error::{Error, Result};

const DEFAULT_DISTRIBUTIONS: &str = include_str!("../data/demographics.tsv");
const DEFAULT_NAMES: &str = include_str!("../data/names.tsv");
const DEFAULT_GEOGRAPHY: &str = include_str!("../data/geography.tsv");

/// Census attributes in sampling order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Age,
    Ethnicity,
    HouseholdType,
    Income,
    Education,
    Politics,
    Gender,
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [
        Attribute::Age,
        Attribute::Ethnicity,
        Attribute::HouseholdType,
        Attribute::Income,
        Attribute::Education,
        Attribute::Politics,
        Attribute::Gender,
    ];

    /// Section header used in the distribution file.
    pub fn header(self) -> &'static str {
        match self {
            Attribute::Age => "Age",
            Attribute::Ethnicity => "Ethnicity",
            Attribute::HouseholdType => "House hold type",
            Attribute::Income => "Income",
            Attribute::Education => "Education",
            Attribute::Politics => "Politics",
            Attribute::Gender => "Gender",
        }
    }

    fn from_header(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.header() == s)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.header())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicProfile {
    pub age: String,
    pub income: String,
    pub education: String,
    pub politics: String,
    pub gender: String,
    pub household_type: String,
    pub ethnicity: String,
    pub name: String,
    pub state: String,
    pub city: String,
}

impl DemographicProfile {
    pub fn get(&self, attribute: Attribute) -> &str {
        match attribute {
            Attribute::Age => &self.age,
            Attribute::Ethnicity => &self.ethnicity,
            Attribute::HouseholdType => &self.household_type,
            Attribute::Income => &self.income,
            Attribute::Education => &self.education,
            Attribute::Politics => &self.politics,
            Attribute::Gender => &self.gender,
        }
    }

    /// Rejects profiles with any empty field.
    pub fn check_complete(&self) -> Result<()> {
        let fields = [
            ("age", &self.age),
            ("income", &self.income),
            ("education", &self.education),
            ("politics", &self.politics),
            ("gender", &self.gender),
            ("household_type", &self.household_type),
            ("ethnicity", &self.ethnicity),
            ("name", &self.name),
            ("state", &self.state),
            ("city", &self.city),
        ];
        match fields.iter().find(|(_, v)| v.trim().is_empty()) {
            Some((field, _)) => Err(Error::Data(format!("profile field {field} is empty"))),
            None => Ok(()),
        }
    }

    /// The `Age: …, Income: …, …, City: …` block substituted into the persona prompt.
    pub fn format_properties(&self) -> String {
        format!(
            "Age: {}, Income: {}, Education: {}, Politics: {}, Gender: {}, House hold type: {}, \
             Ethnicity: {}, Name: {}, State: {}, City: {}",
            self.age,
            self.income,
            self.education,
            self.politics,
            self.gender,
            self.household_type,
            self.ethnicity,
            self.name,
            self.state,
            self.city
        )
    }

    pub fn context(&self) -> Result<BanditContext> {
        to_context(self)
    }
}

/// Maps a profile to its (age class, gender) bandit context.
///
/// Age labels are read by their lower bound (`"25 to 44 years"`,
/// `"85 years or older"`); anything starting below 45 is `Under45`.
pub fn to_context(profile: &DemographicProfile) -> Result<BanditContext> {
    let lower: u32 = profile
        .age
        .split_whitespace()
        .next()
        .and_then(|w| w.parse().ok())
        .filter(|_| profile.age.ends_with("years") || profile.age.ends_with("years or older"))
        .ok_or_else(|| Error::Data(format!("unknown age label {:?}", profile.age)))?;
    let age = if lower < 45 {
        AgeClass::Under45
    } else {
        AgeClass::Over45
    };
    let gender = match profile.gender.to_ascii_lowercase().as_str() {
        "male" => GenderClass::Male,
        "female" => GenderClass::Female,
        _ => return Err(Error::Data(format!("unknown gender label {:?}", profile.gender))),
    };
    Ok(BanditContext::new(age, gender))
}

/// One attribute's labels with renormalized probabilities.
#[derive(Debug, Clone)]
pub struct AttributeDistribution {
    attribute: Attribute,
    labels: Vec<String>,
    weights: Vec<f64>,
    probabilities: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl AttributeDistribution {
    pub fn new(attribute: Attribute, entries: Vec<(String, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config(format!("attribute {attribute} has no entries")));
        }
        if let Some((label, w)) = entries.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config(format!(
                "attribute {attribute}: weight for {label:?} must be positive, got {w}"
            )));
        }
        let (labels, weights): (Vec<String>, Vec<f64>) = entries.into_iter().unzip();
        let total: f64 = weights.iter().sum();
        let probabilities = weights.iter().map(|w| w / total).collect();
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::Config(format!("attribute {attribute}: {e}")))?;
        Ok(Self {
            attribute,
            labels,
            weights,
            probabilities,
            sampler,
        })
    }

    pub fn attribute(&self) -> Attribute {
        self.attribute
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Weights as printed in the source file.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        &self.labels[self.sampler.sample(rng)]
    }
}

#[derive(Debug, Clone)]
pub struct NamePool {
    by_key: BTreeMap<(String, String), Vec<String>>,
}

impl NamePool {
    /// Parses `gender<TAB>ethnicity<TAB>name` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut by_key: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
        for (i, line) in data_lines(text) {
            let cols: Vec<&str> = line.split('\t').collect();
            let [gender, ethnicity, name] = cols[..] else {
                return Err(Error::Config(format!("names line {i}: expected 3 tab-separated fields")));
            };
            by_key
                .entry((gender.to_string(), ethnicity.to_string()))
                .or_default()
                .push(name.to_string());
        }
        if by_key.is_empty() {
            return Err(Error::Config("name pool is empty".into()));
        }
        Ok(Self { by_key })
    }

    pub fn names(&self, gender: &str, ethnicity: &str) -> Option<&[String]> {
        self.by_key
            .get(&(gender.to_string(), ethnicity.to_string()))
            .map(Vec::as_slice)
    }
}

#[derive(Debug, Clone)]
pub struct GeoPool {
    states: Vec<(String, Vec<String>)>,
}

impl GeoPool {
    /// Parses `state<TAB>city` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut states: Vec<(String, Vec<String>)> = Vec::new();
        for (i, line) in data_lines(text) {
            let Some((state, city)) = line.split_once('\t') else {
                return Err(Error::Config(format!("geography line {i}: expected state<TAB>city")));
            };
            match states.iter_mut().find(|(s, _)| s == state) {
                Some((_, cities)) => cities.push(city.to_string()),
                None => states.push((state.to_string(), vec![city.to_string()])),
            }
        }
        if states.is_empty() {
            return Err(Error::Config("geography pool is empty".into()));
        }
        Ok(Self { states })
    }

    pub fn states(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.states.iter().map(|(s, c)| (s.as_str(), c.as_slice()))
    }
}

/// Everything needed to sample a participant.
#[derive(Debug, Clone)]
pub struct Demographics {
    attributes: Vec<AttributeDistribution>,
    names: NamePool,
    geography: GeoPool,
}

impl Demographics {
    /// Shipped distributions and pools.
    pub fn standard() -> Self {
        Self::from_texts(DEFAULT_DISTRIBUTIONS, DEFAULT_NAMES, DEFAULT_GEOGRAPHY)
            .expect("bundled demographic data is valid")
    }

    /// Loads a custom distribution file, keeping the bundled name and geography pools.
    pub fn from_distribution_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_texts(&text, DEFAULT_NAMES, DEFAULT_GEOGRAPHY)
    }

    pub fn from_texts(distributions: &str, names: &str, geography: &str) -> Result<Self> {
        let attributes = parse_distributions(distributions)?;
        let names = NamePool::parse(names)?;
        let geography = GeoPool::parse(geography)?;
        let demo = Self {
            attributes,
            names,
            geography,
        };
        for gender in demo.attribute(Attribute::Gender).labels() {
            for ethnicity in demo.attribute(Attribute::Ethnicity).labels() {
                if demo.names.names(gender, ethnicity).is_none() {
                    return Err(Error::Config(format!(
                        "name pool has no names for ({gender}, {ethnicity})"
                    )));
                }
            }
        }
        Ok(demo)
    }

    pub fn attribute(&self, attribute: Attribute) -> &AttributeDistribution {
        self.attributes
            .iter()
            .find(|d| d.attribute == attribute)
            .expect("all attributes present after parsing")
    }

    pub fn attributes(&self) -> &[AttributeDistribution] {
        &self.attributes
    }

    pub fn sample_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> DemographicProfile {
        let mut draw = |a: Attribute| self.attribute(a).sample(rng).to_string();
        let age = draw(Attribute::Age);
        let ethnicity = draw(Attribute::Ethnicity);
        let household_type = draw(Attribute::HouseholdType);
        let income = draw(Attribute::Income);
        let education = draw(Attribute::Education);
        let politics = draw(Attribute::Politics);
        let gender = draw(Attribute::Gender);

        let pool = self
            .names
            .names(&gender, &ethnicity)
            .expect("name pool covers every gender/ethnicity pair");
        let name = pool[rng.random_range(0..pool.len())].clone();
        let (state, cities) = &self.geography.states[rng.random_range(0..self.geography.states.len())];
        let city = cities[rng.random_range(0..cities.len())].clone();

        DemographicProfile {
            age,
            income,
            education,
            politics,
            gender,
            household_type,
            ethnicity,
            name,
            state: state.clone(),
            city,
        }
    }

    /// Checks every categorical field against the loaded labels.
    pub fn validate(&self, profile: &DemographicProfile) -> Result<()> {
        profile.check_complete()?;
        for d in &self.attributes {
            let v = profile.get(d.attribute);
            if !d.contains(v) {
                return Err(Error::Data(format!("{} label {v:?} not in distribution", d.attribute)));
            }
        }
        Ok(())
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Parses `[Attribute]` sections of `label<TAB>weight` lines.
pub fn parse_distributions(text: &str) -> Result<Vec<AttributeDistribution>> {
    let mut sections: Vec<(Attribute, Vec<(String, f64)>)> = Vec::new();
    for (i, line) in data_lines(text) {
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let attribute = Attribute::from_header(header.trim())
                .ok_or_else(|| Error::Config(format!("line {i}: unknown attribute [{header}]")))?;
            if sections.iter().any(|(a, _)| *a == attribute) {
                return Err(Error::Config(format!("line {i}: duplicate section [{header}]")));
            }
            sections.push((attribute, Vec::new()));
            continue;
        }
        let (_, entries) = sections
            .last_mut()
            .ok_or_else(|| Error::Config(format!("line {i}: entry before any section header")))?;
        let (label, weight) = line
            .rsplit_once('\t')
            .ok_or_else(|| Error::Config(format!("line {i}: expected label<TAB>weight")))?;
        let weight: f64 = weight
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("line {i}: bad weight {weight:?}")))?;
        entries.push((label.to_string(), weight));
    }
    let mut out = Vec::with_capacity(Attribute::ALL.len());
    for attribute in Attribute::ALL {
        let entries = sections
            .iter()
            .find(|(a, _)| *a == attribute)
            .map(|(_, e)| e.clone())
            .ok_or_else(|| Error::Config(format!("missing section [{attribute}]")))?;
        out.push(AttributeDistribution::new(attribute, entries)?);
    }
    Ok(out)
}
