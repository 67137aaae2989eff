//! Synthetic persona: a small generative model of a survey participant.
//!
//! The first reading in a session is `N(base_mean, base_std)`. Each later
//! reading is the previous one plus the effect of every intervention delivered
//! since, plus `N(0, noise_std)`. Readings are clamped to `[0, 100]` and
//! rounded. An intervention's effect depends on its text:
//!
//! * an exact static catalog entry `i` contributes `static_effects[i-1]`;
//! * text naming one or more value labels contributes the sum of the
//!   participant context's sensitivity to each named value;
//! * anything else contributes `untargeted_shift`.
//!
//! Exactly one normal draw is taken per reading, so runs that share a backend
//! seed share their noise regardless of policy.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatMessage, Role, PREFERENCE_PROMPT};
use crate::bandit::{BanditContext, ValueCatalog, ValuePairArm, CONTEXT_COUNT, VALUE_COUNT};
use crate::demographics::{to_context, DemographicProfile};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamRng};
use crate::wizard::{InterventionCatalog, CATALOG_SIZE};

pub const ACKNOWLEDGMENT: &str = "Understood.";

/// Per-context value pairs that carry the planted effect by default.
pub const PLANTED_ARMS: [[u8; 2]; CONTEXT_COUNT] = [[4, 5], [3, 6], [1, 7], [2, 5]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticPersona {
    pub base_mean: f64,
    pub base_std: f64,
    pub noise_std: f64,
    /// Preference points per `[context][value - 1]`.
    pub sensitivity: [[f64; VALUE_COUNT]; CONTEXT_COUNT],
    /// Effect of an intervention that names no value.
    pub untargeted_shift: f64,
    /// Effect of each static catalog intervention, by index - 1.
    pub static_effects: Vec<f64>,
}

impl Default for SyntheticPersona {
    fn default() -> Self {
        let mut sensitivity = [[0.0; VALUE_COUNT]; CONTEXT_COUNT];
        for (ctx, pair) in PLANTED_ARMS.iter().enumerate() {
            for v in pair {
                sensitivity[ctx][usize::from(*v) - 1] = 10.0;
            }
        }
        // a fixed spread over [1, 5] with mean 3
        let static_effects = (0..CATALOG_SIZE)
            .map(|i| 1.0 + 4.0 * ((i * 13) % CATALOG_SIZE) as f64 / (CATALOG_SIZE - 1) as f64)
            .collect();
        Self {
            base_mean: 70.0,
            base_std: 15.0,
            noise_std: 10.0,
            sensitivity,
            untargeted_shift: 4.0,
            static_effects,
        }
    }
}

impl SyntheticPersona {
    /// Every effect zero and no noise: post readings equal pre readings.
    pub fn null() -> Self {
        Self {
            noise_std: 0.0,
            sensitivity: [[0.0; VALUE_COUNT]; CONTEXT_COUNT],
            untargeted_shift: 0.0,
            static_effects: vec![0.0; CATALOG_SIZE],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.base_mean, self.base_std, self.noise_std, self.untargeted_shift]
            .iter()
            .chain(self.sensitivity.iter().flatten())
            .chain(self.static_effects.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("persona parameters must be finite".into()));
        }
        if self.base_std < 0.0 || self.noise_std < 0.0 {
            return Err(Error::Config("persona standard deviations must be non-negative".into()));
        }
        if self.static_effects.len() != CATALOG_SIZE {
            return Err(Error::Config(format!(
                "persona needs {CATALOG_SIZE} static effects, got {}",
                self.static_effects.len()
            )));
        }
        Ok(())
    }

    /// Expected shift from targeting `arm` in `context`, before noise and clamping.
    pub fn arm_effect(&self, context: BanditContext, arm: ValuePairArm) -> f64 {
        arm.values()
            .iter()
            .map(|v| self.sensitivity[context.index()][usize::from(*v) - 1])
            .sum()
    }

    /// Arm with the largest effect in `context` (lowest index on ties).
    pub fn best_arm(&self, context: BanditContext) -> ValuePairArm {
        ValuePairArm::all()
            .fold(None::<(ValuePairArm, f64)>, |best, arm| {
                let e = self.arm_effect(context, arm);
                match best {
                    Some((_, b)) if b >= e => best,
                    _ => Some((arm, e)),
                }
            })
            .map(|(a, _)| a)
            .expect("at least one arm")
    }

    /// Effect of one intervention text on a participant in `context`.
    pub fn intervention_effect(
        &self,
        text: &str,
        context: BanditContext,
        values: &ValueCatalog,
        catalog: &InterventionCatalog,
    ) -> f64 {
        if let Some(i) = catalog.index_of(text) {
            return self.static_effects[usize::from(i) - 1];
        }
        let named: Vec<u8> = values
            .labels()
            .enumerate()
            .filter(|(_, label)| text.contains(label))
            .map(|(i, _)| (i + 1) as u8)
            .collect();
        if named.is_empty() {
            self.untargeted_shift
        } else {
            named
                .iter()
                .map(|v| self.sensitivity[context.index()][usize::from(*v) - 1])
                .sum()
        }
    }
}

fn is_measurement(m: &ChatMessage) -> bool {
    m.role == Role::User && m.content.ends_with(PREFERENCE_PROMPT)
}

/// Text in front of the preference question, when an intervention is asked
/// in the same turn.
fn inline_intervention(m: &ChatMessage) -> Option<&str> {
    let prefix = m.content.strip_suffix(PREFERENCE_PROMPT)?.trim();
    (!prefix.is_empty()).then_some(prefix)
}

/// Synthetic participant's reply to the transcript's last user turn.
pub fn synthetic_reply<R: Rng + ?Sized>(
    persona: &SyntheticPersona,
    context: BanditContext,
    values: &ValueCatalog,
    catalog: &InterventionCatalog,
    transcript: &[ChatMessage],
    rng: &mut R,
) -> String {
    let Some(last) = transcript.last().filter(|m| m.role == Role::User) else {
        return ACKNOWLEDGMENT.to_string();
    };
    if !is_measurement(last) {
        return ACKNOWLEDGMENT.to_string();
    }

    // most recent accepted reading and the interventions after it
    let mut previous: Option<f64> = None;
    let mut effect = 0.0;
    let mut pending_question = false;
    for m in &transcript[..transcript.len() - 1] {
        match m.role {
            Role::System => {}
            Role::User if is_measurement(m) => {
                if let Some(text) = inline_intervention(m) {
                    effect += persona.intervention_effect(text, context, values, catalog);
                }
                pending_question = true;
            }
            Role::User => effect += persona.intervention_effect(&m.content, context, values, catalog),
            Role::Assistant if pending_question => {
                if let Some(v) = super::extract_preference(&m.content) {
                    previous = Some(f64::from(v));
                    effect = 0.0;
                }
                pending_question = false;
            }
            Role::Assistant => {}
        }
    }
    if let Some(text) = inline_intervention(last) {
        effect += persona.intervention_effect(text, context, values, catalog);
    }

    let z: f64 = rng.sample(StandardNormal);
    let raw = match previous {
        None => persona.base_mean + persona.base_std * z,
        Some(prev) => prev + effect + persona.noise_std * z,
    };
    format!("{}", raw.clamp(0.0, 100.0).round() as u8)
}

/// [`ChatBackend`] answering as a synthetic persona.
#[derive(Debug, Clone)]
pub struct SyntheticParticipant {
    persona: SyntheticPersona,
    values: ValueCatalog,
    catalog: InterventionCatalog,
    rng: StreamRng,
    context: Option<BanditContext>,
}

impl SyntheticParticipant {
    pub fn new(persona: SyntheticPersona, rng: StreamRng) -> Self {
        Self {
            persona,
            values: ValueCatalog::standard(),
            catalog: InterventionCatalog::standard(),
            rng,
            context: None,
        }
    }

    /// Participant for trial `step` of a run seeded with `seed`.
    pub fn for_step(persona: SyntheticPersona, seed: u64, step: u64) -> Self {
        Self::new(persona, stream(seed, step))
    }
}

impl ChatBackend for SyntheticParticipant {
    fn tag(&self) -> &str {
        "synthetic"
    }

    fn open(&mut self, profile: &DemographicProfile) -> Result<()> {
        self.context = Some(to_context(profile)?);
        Ok(())
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        let context = self
            .context
            .ok_or_else(|| Error::Usage("synthetic participant used before open".into()))?;
        Ok(synthetic_reply(
            &self.persona,
            context,
            &self.values,
            &self.catalog,
            messages,
            &mut self.rng,
        ))
    }
}

pub const UNTARGETED_STUB: &str = "Switching to a BEV is a simple step toward cleaner and quieter driving.";

/// Deterministic wizard stub: `"Targeted: {values}."` for targeted prompts,
/// a fixed sentence otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticWizard;

impl ChatBackend for SyntheticWizard {
    fn tag(&self) -> &str {
        "synthetic"
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        let system = messages
            .iter()
            .find(|m| m.role == Role::System)
            .ok_or_else(|| Error::Protocol("wizard prompt has no system message".into()))?;
        let values = system
            .content
            .split_once("are inferred as follows: ")
            .and_then(|(_, rest)| rest.split_once(". Please answer"))
            .map(|(values, _)| values);
        Ok(match values {
            Some(v) => format!("Targeted: {v}."),
            None => UNTARGETED_STUB.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{AgeClass, GenderClass};
    use crate::participants::tests::profile;
    use crate::participants::ParticipantSession;
    use crate::wizard::{generate_intervention, WizardRequest};

    fn ctx() -> BanditContext {
        BanditContext::new(AgeClass::Under45, GenderClass::Male)
    }

    fn run_trial(persona: SyntheticPersona, seed: u64, intervention: &str) -> (u8, u8) {
        let mut b = SyntheticParticipant::for_step(persona, seed, 0);
        let mut s = ParticipantSession::open(profile(), &mut b).unwrap();
        let pre = s.measure_preference().unwrap().value;
        s.deliver_intervention(intervention).unwrap();
        let post = s.measure_preference().unwrap().value;
        (pre, post)
    }

    #[test]
    fn defaults_are_valid() {
        let p = SyntheticPersona::default();
        p.validate().unwrap();
        for c in BanditContext::all() {
            let best = p.best_arm(c);
            assert_eq!(best.values(), PLANTED_ARMS[c.index()]);
            assert_eq!(p.arm_effect(c, best), 20.0);
            let runner_up = ValuePairArm::all()
                .filter(|a| *a != best)
                .map(|a| p.arm_effect(c, a))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(p.arm_effect(c, best) - runner_up >= 10.0);
        }
        let mean_static: f64 = p.static_effects.iter().sum::<f64>() / 35.0;
        assert!((mean_static - 3.0).abs() < 1e-12);
    }

    #[test]
    fn null_intervention_leaves_preference() {
        for seed in 0..50 {
            let (pre, post) = run_trial(SyntheticPersona::null(), seed, "Targeted: Status symbol.");
            assert_eq!(pre, post);
        }
    }

    #[test]
    fn targeted_values_shift_by_sensitivity_sum() {
        // noise off and a base far from the clamps: the shift is exactly the sensitivity sum
        let mut p = SyntheticPersona::null();
        p.base_mean = 50.0;
        p.base_std = 0.0;
        p.sensitivity[ctx().index()][3] = 7.0;
        p.sensitivity[ctx().index()][4] = 5.0;
        let (pre, post) = run_trial(p.clone(), 1, "Targeted: Charging infrastructure, Economic benefits.");
        assert_eq!((pre, post), (50, 62));
        let (_, post) = run_trial(p, 1, "Targeted: Status symbol.");
        assert_eq!(post, 50);
    }

    #[test]
    fn static_and_untargeted_effects() {
        let mut p = SyntheticPersona::null();
        p.base_mean = 40.0;
        p.base_std = 0.0;
        p.static_effects[20] = 9.0;
        p.untargeted_shift = -6.0;
        let catalog = InterventionCatalog::standard();
        let (_, post) = run_trial(p.clone(), 0, catalog.get(21).unwrap());
        assert_eq!(post, 49);
        let (_, post) = run_trial(p, 0, UNTARGETED_STUB);
        assert_eq!(post, 34);
    }

    #[test]
    fn base_preference_moments() {
        // unclamped moments of the pre-reading draw
        let p = SyntheticPersona::default();
        let n = 10_000;
        let mut xs = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let z: f64 = stream(77, i).sample(StandardNormal);
            xs.push(p.base_mean + p.base_std * z);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 70.0).abs() < 1.0, "mean {mean}");
        assert!((sd - 15.0).abs() < 1.0, "sd {sd}");
    }

    #[test]
    fn planted_arm_mean_shift() {
        let p = SyntheticPersona {
            base_mean: 50.0,
            base_std: 5.0,
            ..SyntheticPersona::default()
        };
        let labels = ValueCatalog::standard();
        let best = p.best_arm(ctx());
        let text = format!("Targeted: {}.", labels.arm_labels(best).join(", "));
        let trials = 1000;
        let shifts: Vec<f64> = (0..trials)
            .map(|s| {
                let (pre, post) = run_trial(p.clone(), s, &text);
                f64::from(post) - f64::from(pre)
            })
            .collect();
        let mean = shifts.iter().sum::<f64>() / trials as f64;
        let se = p.noise_std / (trials as f64).sqrt();
        assert!((mean - 20.0).abs() <= 3.0 * se, "mean shift {mean}");
    }

    #[test]
    fn same_seed_same_session() {
        let a = run_trial(SyntheticPersona::default(), 5, "x");
        let b = run_trial(SyntheticPersona::default(), 5, "x");
        assert_eq!(a, b);
    }

    #[test]
    fn wizard_stub() {
        let req = WizardRequest::targeted(30, vec!["Economic benefits".into(), "Status symbol".into()]).unwrap();
        let g = generate_intervention(&req, &mut SyntheticWizard).unwrap();
        assert_eq!(g.text, "Targeted: Economic benefits, Status symbol.");
        let g = generate_intervention(&WizardRequest::untargeted(30).unwrap(), &mut SyntheticWizard).unwrap();
        assert_eq!(g.text, UNTARGETED_STUB);
        assert!(ValueCatalog::standard().labels().all(|l| !UNTARGETED_STUB.contains(l)));
    }
}
