//! Intervention text: generated from targeted values, or drawn from the
//! static catalog used in the human survey.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::participants::{ChatBackend, ChatMessage};

pub const WIZARD_USER_TEMPLATE: &str = "My preference for BEV is {initial pref.} out of 0 to 100.";

pub const WIZARD_SYSTEM_TEMPLATE: &str = "Generate your response to improve the user's preference for BEV. You are a Chatbot. The conversational partner's values for BEV are inferred as follows: {values}. Please answer in 1 sentence concisely, with no additional explanation.";

/// System prompt for untargeted generation: the values sentence is dropped.
pub const WIZARD_UNTARGETED_SYSTEM: &str = "Generate your response to improve the user's preference for BEV. You are a Chatbot. Please answer in 1 sentence concisely, with no additional explanation.";

/// One initial attempt plus three retries.
pub const MAX_GENERATION_ATTEMPTS: u32 = 4;

const DEFAULT_CATALOG: &str = include_str!("../data/interventions.txt");
pub const CATALOG_SIZE: usize = 35;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WizardRequest {
    initial_preference: u8,
    targeted_values: Vec<String>,
}

impl WizardRequest {
    pub fn targeted(initial_preference: u8, values: Vec<String>) -> Result<Self> {
        if !(1..=2).contains(&values.len()) {
            return Err(Error::Usage(format!(
                "wizard needs 1 or 2 targeted values, got {}",
                values.len()
            )));
        }
        Self::check_preference(initial_preference)?;
        Ok(Self {
            initial_preference,
            targeted_values: values,
        })
    }

    pub fn untargeted(initial_preference: u8) -> Result<Self> {
        Self::check_preference(initial_preference)?;
        Ok(Self {
            initial_preference,
            targeted_values: Vec::new(),
        })
    }

    fn check_preference(p: u8) -> Result<()> {
        if p > 100 {
            return Err(Error::Domain(format!("initial preference {p} outside [0, 100]")));
        }
        Ok(())
    }

    pub fn initial_preference(&self) -> u8 {
        self.initial_preference
    }

    pub fn targeted_values(&self) -> &[String] {
        &self.targeted_values
    }
}

/// Returns `(user message, system message)`.
pub fn build_wizard_prompts(request: &WizardRequest) -> (String, String) {
    let user = WIZARD_USER_TEMPLATE.replace("{initial pref.}", &request.initial_preference.to_string());
    let system = if request.targeted_values.is_empty() {
        WIZARD_UNTARGETED_SYSTEM.to_string()
    } else {
        WIZARD_SYSTEM_TEMPLATE.replace("{values}", &request.targeted_values.join(", "))
    };
    (user, system)
}

/// A generated intervention and the exchange that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    pub messages: Vec<ChatMessage>,
    pub attempts: u32,
}

pub fn generate_intervention(
    request: &WizardRequest,
    backend: &mut dyn ChatBackend,
) -> Result<Generation> {
    let (user, system) = build_wizard_prompts(request);
    let messages = vec![ChatMessage::system(system), ChatMessage::user(user)];
    for attempt in 1..=MAX_GENERATION_ATTEMPTS {
        let reply = backend.complete(&messages)?;
        let text = reply.trim();
        if !text.is_empty() {
            let mut messages = messages;
            messages.push(ChatMessage::assistant(text));
            return Ok(Generation {
                text: text.to_string(),
                messages,
                attempts: attempt,
            });
        }
        log::debug!("empty wizard generation on attempt {attempt}");
    }
    Err(Error::GenerationFailed {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// The 35 static survey interventions, indexed from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionCatalog {
    texts: Vec<String>,
}

impl Default for InterventionCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

impl InterventionCatalog {
    pub fn standard() -> Self {
        Self::parse(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// One intervention per line, in index order.
    pub fn parse(text: &str) -> Result<Self> {
        let texts: Vec<String> = text
            .lines()
            .map(|l| l.trim_end_matches('\r').to_string())
            .filter(|l| !l.trim().is_empty())
            .collect();
        if texts.len() != CATALOG_SIZE {
            return Err(Error::Config(format!(
                "intervention catalog has {} entries, expected {CATALOG_SIZE}",
                texts.len()
            )));
        }
        Ok(Self { texts })
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn get(&self, index: u8) -> Option<&str> {
        let i = usize::from(index).checked_sub(1)?;
        self.texts.get(i).map(String::as_str)
    }

    pub fn index_of(&self, text: &str) -> Option<u8> {
        let text = text.trim();
        self.texts.iter().position(|t| t == text).map(|i| (i + 1) as u8)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, &str)> {
        self.texts
            .iter()
            .enumerate()
            .map(|(i, t)| ((i + 1) as u8, t.as_str()))
    }

    /// Uniform draw; returns the 1-based index with its text.
    pub fn pick_static<R: Rng + ?Sized>(&self, rng: &mut R) -> (u8, &str) {
        let i = rng.random_range(0..self.texts.len());
        ((i + 1) as u8, &self.texts[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::participants::ScriptedBackend;
    use crate::rng::stream;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn templates_have_one_slot_each() {
        for t in [WIZARD_USER_TEMPLATE, WIZARD_SYSTEM_TEMPLATE] {
            assert_eq!(t.matches('{').count(), 1);
            assert_eq!(t.matches('}').count(), 1);
        }
        assert!(!WIZARD_UNTARGETED_SYSTEM.contains('{'));
    }

    #[test]
    fn prompts_substitute_values_and_preference() {
        let req = WizardRequest::targeted(
            25,
            vec!["Carbon emission reduction".into(), "Government incentives".into()],
        )
        .unwrap();
        let (user, system) = build_wizard_prompts(&req);
        assert_eq!(user, "My preference for BEV is 25 out of 0 to 100.");
        assert!(system.contains(
            "are inferred as follows: Carbon emission reduction, Government incentives. Please"
        ));

        let (user, _) = build_wizard_prompts(&WizardRequest::untargeted(0).unwrap());
        assert!(user.contains("is 0 out of 0 to 100."));
    }

    #[test]
    fn prompts_match_golden_files() {
        let req = WizardRequest::targeted(
            25,
            vec!["Carbon emission reduction".into(), "Government incentives".into()],
        )
        .unwrap();
        let (user, system) = build_wizard_prompts(&req);
        assert_eq!(user, include_str!("../tests/fixtures/golden/wizard_user.txt").trim_end_matches('\n'));
        assert_eq!(system, include_str!("../tests/fixtures/golden/wizard_system.txt").trim_end_matches('\n'));
        let (_, untargeted) = build_wizard_prompts(&WizardRequest::untargeted(25).unwrap());
        assert_eq!(
            untargeted,
            include_str!("../tests/fixtures/golden/wizard_system_untargeted.txt").trim_end_matches('\n')
        );
    }

    #[test]
    fn request_validation() {
        assert!(WizardRequest::targeted(50, vec![]).is_err());
        assert!(WizardRequest::targeted(50, vec!["a".into(), "b".into(), "c".into()]).is_err());
        assert!(WizardRequest::untargeted(101).is_err());
    }

    #[test]
    fn generation_retries_on_blank_replies() {
        let req = WizardRequest::untargeted(40).unwrap();
        let mut b = ScriptedBackend::new(["  ", "\n", "Try a BEV."]);
        let g = generate_intervention(&req, &mut b).unwrap();
        assert_eq!((g.text.as_str(), g.attempts), ("Try a BEV.", 3));
        assert_eq!(g.messages.len(), 3);

        let mut b = ScriptedBackend::new(vec![" "; 4]);
        assert!(matches!(
            generate_intervention(&req, &mut b),
            Err(Error::GenerationFailed { attempts: 4 })
        ));
    }

    #[test]
    fn catalog_contents() {
        let c = InterventionCatalog::standard();
        assert_eq!(c.len(), 35);
        assert_eq!(
            c.get(1),
            Some("80% of BEV charging happens at home, and most trips do not involve public charging.")
        );
        assert_eq!(c.get(21), Some("BEVs have a smaller carbon footprint than ICEVs."));
        assert_eq!(c.get(0), None);
        assert_eq!(c.get(36), None);
        assert_eq!(c.index_of("BEVs have a smaller carbon footprint than ICEVs."), Some(21));
        assert!(InterventionCatalog::parse("one\ntwo\n").is_err());
    }

    #[test]
    fn static_draws_are_uniform_and_seeded() {
        let c = InterventionCatalog::standard();
        let n = 35_000u64;
        let mut counts = [0u32; 35];
        // with 35 bins a per-bin 3-sigma bound fails for roughly 1 seed in 10
        for i in 0..n {
            let (idx, text) = c.pick_static(&mut stream(1, i));
            assert_eq!(c.get(idx), Some(text));
            counts[usize::from(idx) - 1] += 1;
        }
        let p = 1.0 / 35.0;
        let (mean, sigma) = (n as f64 * p, (n as f64 * p * (1.0 - p)).sqrt());
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma);
        }
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - mean).powi(2) / mean).sum();
        let p_value = 1.0 - ChiSquared::new(34.0).unwrap().cdf(chi2);
        assert!(p_value > 0.001, "chi-square p = {p_value}");
        let a: Vec<u8> = (0..20).map(|i| c.pick_static(&mut stream(3, i)).0).collect();
        let b: Vec<u8> = (0..20).map(|i| c.pick_static(&mut stream(3, i)).0).collect();
        assert_eq!(a, b);
    }
}
