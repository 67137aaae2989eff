//! End-to-end runs: the bandit learning loop and the fixed-intervention
//! survey replication, plus the summaries computed from their records.

mod log;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::log::{
    read_log, run_bandit_to_log, run_replication_to_log, ExperimentLog, LogHeader, LogLine,
    RunKind, WriteMode, LOG_SCHEMA, LOG_VERSION,
};
use crate::bandit::{
    normalize_reward, BanditContext, BanditState, Policy, ValueCatalog, ValuePairArm,
    CONTEXT_COUNT, VALUE_COUNT,
};
use crate::demographics::{to_context, DemographicProfile, Demographics};
use crate::error::{Error, Result};
use crate::participants::remote::{RemoteChat, RemoteSettings};
use crate::participants::synthetic::{SyntheticParticipant, SyntheticPersona, SyntheticWizard};
use crate::participants::{ChatBackend, ChatMessage, ParticipantSession};
use crate::rng::{stream, Seeds};
use crate::stats::EffectCell;
use crate::wizard::{generate_intervention, InterventionCatalog, WizardRequest};

/// Trials evaluated concurrently per batch in a replication run.
const REPLICATION_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Synthetic,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(BackendKind::Synthetic),
            "remote" => Ok(BackendKind::Remote),
            _ => Err(Error::Usage(format!("unknown backend {s:?} (expected synthetic or remote)"))),
        }
    }
}

/// Everything that determines a run. Written into the log header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Unused by replication runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    /// Bandit steps, or participants for a replication run.
    pub steps: u64,
    pub backend: BackendKind,
    pub seeds: Seeds,
    #[serde(default)]
    pub persona: SyntheticPersona,
    /// Participant endpoint for the remote backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteSettings>,
    /// Wizard endpoint for the remote backend; defaults to `remote`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wizard: Option<RemoteSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_file: Option<PathBuf>,
}

impl RunConfig {
    /// Synthetic-backend config with default persona.
    pub fn synthetic(policy: Option<Policy>, steps: u64, seeds: Seeds) -> Self {
        Self {
            policy,
            steps,
            backend: BackendKind::Synthetic,
            seeds,
            persona: SyntheticPersona::default(),
            remote: None,
            wizard: None,
            demographics_file: None,
            catalog_file: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        self.persona.validate()?;
        if self.backend == BackendKind::Remote && self.remote.is_none() {
            return Err(Error::Config("remote backend needs a [remote] section".into()));
        }
        Ok(())
    }

    pub fn demographics(&self) -> Result<Demographics> {
        match &self.demographics_file {
            Some(p) => Demographics::from_distribution_file(p),
            None => Ok(Demographics::standard()),
        }
    }

    pub fn catalog(&self) -> Result<InterventionCatalog> {
        match &self.catalog_file {
            Some(p) => InterventionCatalog::from_file(p),
            None => Ok(InterventionCatalog::standard()),
        }
    }
}

/// Optional settings read from a TOML config file; command-line flags fill
/// in or override the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub policy: Option<Policy>,
    pub steps: Option<u64>,
    pub backend: Option<BackendKind>,
    pub persona: Option<SyntheticPersona>,
    pub remote: Option<RemoteSettings>,
    pub wizard: Option<RemoteSettings>,
    pub demographics_file: Option<PathBuf>,
    pub catalog_file: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Relative data-file paths are resolved against the config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.demographics_file, &mut cfg.catalog_file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// One trial of either study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 1-based trial index.
    pub step: u64,
    /// `None` for replication trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    pub profile: DemographicProfile,
    pub context: BanditContext,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<ValuePairArm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_index: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervention: Option<String>,
    pub pre: Option<u8>,
    pub post: Option<u8>,
    pub shift: Option<i16>,
    pub reward: Option<f64>,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_reason: Option<String>,
    /// Replies that held no usable preference, across both readings.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected_replies: Vec<String>,
    pub transcript: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wizard_transcript: Vec<ChatMessage>,
}

impl TrialRecord {
    pub fn valid_shift(&self) -> Option<i16> {
        self.shift.filter(|_| self.valid)
    }

    pub fn valid_post(&self) -> Option<u8> {
        self.post.filter(|_| self.valid)
    }
}

/// Builds the chat backends for each trial.
pub trait BackendFactory: Sync {
    fn participant(&self, step: u64) -> Result<Box<dyn ChatBackend>>;
    fn wizard(&self, step: u64) -> Result<Box<dyn ChatBackend>>;
}

/// Backends described by a [`RunConfig`].
pub struct ConfiguredBackends {
    persona: SyntheticPersona,
    backend_seed: u64,
    remote: Option<(RemoteChat, RemoteChat)>,
}

impl ConfiguredBackends {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let remote = match config.backend {
            BackendKind::Synthetic => None,
            BackendKind::Remote => {
                let participant = config
                    .remote
                    .clone()
                    .ok_or_else(|| Error::Config("remote backend needs a [remote] section".into()))?;
                let wizard = config.wizard.clone().unwrap_or_else(|| participant.clone());
                Some((RemoteChat::new(participant)?, RemoteChat::new(wizard)?))
            }
        };
        Ok(Self {
            persona: config.persona.clone(),
            backend_seed: config.seeds.backend,
            remote,
        })
    }
}

impl BackendFactory for ConfiguredBackends {
    fn participant(&self, step: u64) -> Result<Box<dyn ChatBackend>> {
        Ok(match &self.remote {
            Some((p, _)) => Box::new(p.clone()),
            None => Box::new(SyntheticParticipant::for_step(self.persona.clone(), self.backend_seed, step)),
        })
    }

    fn wizard(&self, _step: u64) -> Result<Box<dyn ChatBackend>> {
        Ok(match &self.remote {
            Some((_, w)) => Box::new(w.clone()),
            None => Box::new(SyntheticWizard),
        })
    }
}

/// How the intervention for a trial is produced.
#[derive(Debug, Clone)]
enum Plan {
    Targeted(ValuePairArm),
    Untargeted,
    Static(u8, String),
}

fn sample_participant(demographics: &Demographics, seeds: &Seeds, step: u64) -> Result<(DemographicProfile, BanditContext)> {
    let profile = demographics.sample_profile(&mut stream(seeds.demographics, step));
    let context = to_context(&profile)?;
    Ok((profile, context))
}

/// Runs one pre/intervene/post trial. Trial-local failures produce an
/// invalid record; anything else aborts.
#[allow(clippy::too_many_arguments)]
fn conduct_trial(
    step: u64,
    policy: Option<Policy>,
    profile: DemographicProfile,
    context: BanditContext,
    plan: Plan,
    participant: &mut dyn ChatBackend,
    wizard: &mut dyn ChatBackend,
    values: &ValueCatalog,
) -> Result<TrialRecord> {
    let mut record = TrialRecord {
        step,
        policy,
        profile: profile.clone(),
        context,
        arm: None,
        static_index: None,
        intervention: None,
        pre: None,
        post: None,
        shift: None,
        reward: None,
        valid: false,
        invalid_reason: None,
        rejected_replies: Vec::new(),
        transcript: Vec::new(),
        wizard_transcript: Vec::new(),
    };
    let mut session = ParticipantSession::open(profile, participant)?;

    let outcome = (|| -> Result<()> {
        let pre = session.measure_preference()?;
        record.rejected_replies.extend(pre.rejected);
        record.pre = Some(pre.value);

        let text = match &plan {
            Plan::Static(index, text) => {
                record.static_index = Some(*index);
                text.clone()
            }
            Plan::Targeted(arm) => {
                record.arm = Some(*arm);
                let labels = values.arm_labels(*arm).map(str::to_string).to_vec();
                let generation = generate_intervention(&WizardRequest::targeted(pre.value, labels)?, wizard)?;
                record.wizard_transcript = generation.messages;
                generation.text
            }
            Plan::Untargeted => {
                let generation = generate_intervention(&WizardRequest::untargeted(pre.value)?, wizard)?;
                record.wizard_transcript = generation.messages;
                generation.text
            }
        };
        record.intervention = Some(text.clone());
        session.deliver_intervention(&text)?;

        let post = session.measure_preference()?;
        record.rejected_replies.extend(post.rejected);
        let shift = i16::from(post.value) - i16::from(pre.value);
        record.post = Some(post.value);
        record.shift = Some(shift);
        record.reward = Some(normalize_reward(f64::from(shift))?);
        record.valid = true;
        Ok(())
    })();

    match outcome {
        Ok(()) => {}
        Err(Error::InvalidTrial { replies }) => {
            record.rejected_replies.extend(replies);
            let which = if record.pre.is_none() { "pre" } else { "post" };
            record.invalid_reason = Some(format!("no {which}-intervention preference after repeated asks"));
        }
        Err(e @ Error::GenerationFailed { .. }) => record.invalid_reason = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    record.transcript = session.into_transcript();
    Ok(record)
}

/// Records plus the bandit state after the last of them.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditRun {
    pub records: Vec<TrialRecord>,
    pub state: BanditState,
}

/// Bandit state implied by a run's records: every valid UCB trial is one update.
pub fn replay_state(records: &[TrialRecord]) -> Result<BanditState> {
    let mut state = BanditState::new();
    for r in records {
        if r.policy == Some(Policy::Ucb) {
            if let (true, Some(arm), Some(reward)) = (r.valid, r.arm, r.reward) {
                state.update(r.context, arm, reward)?;
            }
        }
    }
    Ok(state)
}

fn check_prior(prior: &[TrialRecord], steps: u64) -> Result<()> {
    if prior.len() as u64 > steps {
        return Err(Error::Data(format!(
            "log already holds {} trials, more than the {steps} configured",
            prior.len()
        )));
    }
    for (i, r) in prior.iter().enumerate() {
        if r.step != i as u64 + 1 {
            return Err(Error::Data(format!("trial {} found where {} was expected", r.step, i + 1)));
        }
    }
    Ok(())
}

/// In-memory bandit run with the backends named in `config`.
pub fn run_bandit_experiment(config: &RunConfig) -> Result<BanditRun> {
    let backends = ConfiguredBackends::new(config)?;
    run_bandit_with(config, &backends, Vec::new(), &mut |_| Ok(()))
}

/// Continues a bandit run after `prior` (trials `1..=k`), passing each new
/// record to `sink` before the next step starts.
pub fn run_bandit_with(
    config: &RunConfig,
    backends: &dyn BackendFactory,
    prior: Vec<TrialRecord>,
    sink: &mut dyn FnMut(&TrialRecord) -> Result<()>,
) -> Result<BanditRun> {
    config.validate()?;
    let policy = config
        .policy
        .ok_or_else(|| Error::Config("bandit run needs a policy".into()))?;
    check_prior(&prior, config.steps)?;
    let demographics = config.demographics()?;
    let values = ValueCatalog::standard();
    let mut state = replay_state(&prior)?;
    let mut records = prior;

    for step in records.len() as u64 + 1..=config.steps {
        let (profile, context) = sample_participant(&demographics, &config.seeds, step)?;
        let plan = match policy {
            Policy::PureLlm => Plan::Untargeted,
            p => Plan::Targeted(state.select_arm(context, p, &mut stream(config.seeds.bandit, step))?),
        };
        let mut participant = backends.participant(step)?;
        let mut wizard = backends.wizard(step)?;
        let record = conduct_trial(
            step,
            Some(policy),
            profile,
            context,
            plan,
            participant.as_mut(),
            wizard.as_mut(),
            &values,
        )?;
        if policy == Policy::Ucb && record.valid {
            if let (Some(arm), Some(reward)) = (record.arm, record.reward) {
                state.update(context, arm, reward)?;
            }
        }
        sink(&record)?;
        records.push(record);
    }
    Ok(BanditRun { records, state })
}

/// In-memory replication run of `config.steps` participants.
pub fn run_replication(config: &RunConfig) -> Result<Vec<TrialRecord>> {
    let backends = ConfiguredBackends::new(config)?;
    run_replication_with(config, &backends, Vec::new(), &mut |_| Ok(()))
}

/// Replication trials run concurrently in batches; records reach `sink` in
/// step order, and the run stops at the first failing step.
pub fn run_replication_with(
    config: &RunConfig,
    backends: &dyn BackendFactory,
    prior: Vec<TrialRecord>,
    sink: &mut dyn FnMut(&TrialRecord) -> Result<()>,
) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    check_prior(&prior, config.steps)?;
    let demographics = config.demographics()?;
    let catalog = config.catalog()?;
    let values = ValueCatalog::standard();
    let mut records = prior;

    let remaining: Vec<u64> = (records.len() as u64 + 1..=config.steps).collect();
    for batch in remaining.chunks(REPLICATION_BATCH) {
        let results: Vec<Result<TrialRecord>> = batch
            .par_iter()
            .map(|&step| {
                let (profile, context) = sample_participant(&demographics, &config.seeds, step)?;
                let (index, text) = catalog.pick_static(&mut stream(config.seeds.bandit, step));
                let mut participant = backends.participant(step)?;
                let mut wizard = backends.wizard(step)?;
                conduct_trial(
                    step,
                    None,
                    profile,
                    context,
                    Plan::Static(index, text.to_string()),
                    participant.as_mut(),
                    wizard.as_mut(),
                    &values,
                )
            })
            .collect();
        for result in results {
            let record = result?;
            sink(&record)?;
            records.push(record);
        }
    }
    Ok(records)
}

/// `(step, accumulated raw shift)`; invalid trials add nothing.
pub fn cumulative_shift_series(records: &[TrialRecord]) -> Vec<(u64, i64)> {
    records
        .iter()
        .scan(0i64, |acc, r| {
            *acc += i64::from(r.valid_shift().unwrap_or(0));
            Some((r.step, *acc))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "mean and standard deviation need 2 values, got {}",
                xs.len()
            )));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mean,
            std: var.sqrt(),
            n: xs.len(),
        })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2}±{:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSummary {
    pub post: MeanStd,
    pub shift: MeanStd,
}

/// Mean and sample standard deviation of post preference and shift over valid trials.
pub fn summarize_preferences(records: &[TrialRecord]) -> Result<PreferenceSummary> {
    let (post, shift): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| Some((f64::from(r.valid_post()?), f64::from(r.valid_shift()?))))
        .unzip();
    Ok(PreferenceSummary {
        post: MeanStd::of(&post)?,
        shift: MeanStd::of(&shift)?,
    })
}

/// Mean shift per `(context, value)`, each arm's shift credited to both of its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftMatrix {
    pub cells: [[Option<EffectCell>; VALUE_COUNT]; CONTEXT_COUNT],
}

impl MeanShiftMatrix {
    /// Cell for a 1-based value index.
    pub fn get(&self, context: BanditContext, value: u8) -> Option<EffectCell> {
        self.cells[context.index()].get(usize::from(value).checked_sub(1)?).copied().flatten()
    }
}

pub fn mean_shift_matrix(records: &[TrialRecord]) -> MeanShiftMatrix {
    let mut sums = [[(0i64, 0u64); VALUE_COUNT]; CONTEXT_COUNT];
    for r in records {
        if let (Some(arm), Some(shift)) = (r.arm, r.valid_shift()) {
            for v in arm.values() {
                let cell = &mut sums[r.context.index()][usize::from(v) - 1];
                cell.0 += i64::from(shift);
                cell.1 += 1;
            }
        }
    }
    let cells = sums.map(|row| {
        row.map(|(s, n)| {
            (n > 0).then(|| EffectCell {
                mean_shift: s as f64 / n as f64,
                count: n,
            })
        })
    });
    MeanShiftMatrix { cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::participants::tests::profile;
    use crate::participants::ScriptedBackend;
    use crate::bandit::{AgeClass, GenderClass};
    use crate::stats::per_intervention_means;

    pub(crate) fn record(step: u64, shift: Option<i16>) -> TrialRecord {
        let profile = profile();
        TrialRecord {
            step,
            policy: Some(Policy::Ucb),
            context: to_context(&profile).unwrap(),
            profile,
            arm: None,
            static_index: None,
            intervention: None,
            pre: shift.map(|_| 50),
            post: shift.map(|s| (50 + s) as u8),
            shift,
            reward: shift.map(|s| normalize_reward(f64::from(s)).unwrap()),
            valid: shift.is_some(),
            invalid_reason: None,
            rejected_replies: Vec::new(),
            transcript: Vec::new(),
            wizard_transcript: Vec::new(),
        }
    }

    #[test]
    fn cumulative_series() {
        let rs: Vec<_> = [10, -5, 0].iter().enumerate().map(|(i, s)| record(i as u64 + 1, Some(*s))).collect();
        assert_eq!(cumulative_shift_series(&rs), vec![(1, 10), (2, 5), (3, 5)]);
        let mut rs = rs;
        rs.push(record(4, None));
        assert_eq!(cumulative_shift_series(&rs).last(), Some(&(4, 5)));
    }

    #[test]
    fn two_point_summary() {
        let mut a = record(1, Some(3));
        a.pre = Some(67);
        a.post = Some(70);
        let mut b = record(2, Some(3));
        b.pre = Some(69);
        b.post = Some(72);
        let s = summarize_preferences(&[a.clone(), b, record(3, None)]).unwrap();
        assert_eq!(s.post.mean, 71.0);
        assert!((s.post.std - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!((s.shift.mean, s.shift.std), (3.0, 0.0));
        assert!(matches!(summarize_preferences(&[a]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn summary_matches_streaming_computation() {
        let xs: Vec<f64> = (0..997).map(|i| ((i * 7919) % 101) as f64 - 13.5).collect();
        let batch = MeanStd::of(&xs).unwrap();
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for x in &xs {
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        assert!((batch.mean - mean).abs() < 1e-9);
        assert!((batch.std - (m2 / (n - 1.0)).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn matrix_credits_both_values() {
        let mut r = record(1, Some(40));
        r.arm = Some(ValuePairArm::new(3, 5).unwrap());
        let ctx = BanditContext::new(AgeClass::Under45, GenderClass::Male);
        assert_eq!(r.context, ctx);
        let m = mean_shift_matrix(&[r]);
        for v in 1..=8 {
            let cell = m.get(ctx, v);
            if v == 3 || v == 5 {
                assert_eq!(cell.unwrap().mean_shift, 40.0);
            } else {
                assert!(cell.is_none());
            }
        }
        for other in BanditContext::all().into_iter().filter(|c| *c != ctx) {
            assert!((1..=8).all(|v| m.get(other, v).is_none()));
        }
    }

    #[test]
    fn matrix_is_order_invariant() {
        let rs: Vec<TrialRecord> = (0..28)
            .map(|i| {
                let mut r = record(i + 1, Some((i as i16 * 7) % 23 - 11));
                r.arm = ValuePairArm::from_index(i as usize);
                r
            })
            .collect();
        let mut rev = rs.clone();
        rev.reverse();
        assert_eq!(mean_shift_matrix(&rs), mean_shift_matrix(&rev));
    }

    #[test]
    fn invalid_pre_reading_yields_invalid_record() {
        let mut participant = ScriptedBackend::new(vec!["no"; 10]);
        let mut wizard = SyntheticWizard;
        let p = profile();
        let ctx = to_context(&p).unwrap();
        let r = conduct_trial(1, Some(Policy::PureLlm), p, ctx, Plan::Untargeted, &mut participant, &mut wizard, &ValueCatalog::standard()).unwrap();
        assert!(!r.valid);
        assert_eq!(r.rejected_replies.len(), 10);
        assert!(r.reward.is_none() && r.pre.is_none());
        assert!(r.invalid_reason.unwrap().contains("pre"));
    }

    #[test]
    fn transport_failure_aborts() {
        let mut participant = ScriptedBackend::new(["70", "ok"]);
        let mut wizard = SyntheticWizard;
        let p = profile();
        let ctx = to_context(&p).unwrap();
        let err = conduct_trial(1, None, p, ctx, Plan::Static(1, "x".into()), &mut participant, &mut wizard, &ValueCatalog::standard());
        assert!(matches!(err, Err(Error::Protocol(_))));
    }

    #[test]
    fn null_persona_replication_has_zero_shifts() {
        let mut cfg = RunConfig::synthetic(None, 300, Seeds::from_master(3));
        cfg.persona = SyntheticPersona::null();
        let rs = run_replication(&cfg).unwrap();
        assert_eq!(rs.len(), 300);
        assert!(rs.iter().all(|r| r.valid && r.shift == Some(0)));
        let means = per_intervention_means(&rs);
        assert!(means.iter().flatten().all(|c| c.mean_shift == 0.0));
        let again = run_replication(&cfg).unwrap();
        let idx = |rs: &[TrialRecord]| rs.iter().map(|r| r.static_index).collect::<Vec<_>>();
        assert_eq!(idx(&rs), idx(&again));
    }

    #[test]
    fn reward_matches_shift_for_every_valid_record() {
        let cfg = RunConfig::synthetic(Some(Policy::Ucb), 200, Seeds::from_master(11));
        let run = run_bandit_experiment(&cfg).unwrap();
        for r in &run.records {
            if r.valid {
                let shift = i16::from(r.post.unwrap()) - i16::from(r.pre.unwrap());
                assert_eq!(r.shift, Some(shift));
                assert_eq!(r.reward, Some(normalize_reward(f64::from(shift)).unwrap()));
            } else {
                assert!(r.reward.is_none());
            }
        }
        assert_eq!(run.state, replay_state(&run.records).unwrap());
        let updates = run.records.iter().filter(|r| r.valid).count() as u64;
        assert_eq!(run.state.step(), updates);
    }

    #[test]
    fn config_file_parsing() {
        let cfg = ConfigFile::parse(
            r#"
            policy = "pure-llm"
            steps = 50
            backend = "remote"

            [persona]
            untargeted_shift = 10.0

            [remote]
            endpoint = "http://localhost:8080/v1/chat/completions"
            model = "llama-2-70b-chat"
            style = "llama2"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.policy, Some(Policy::PureLlm));
        assert_eq!(cfg.persona.unwrap().untargeted_shift, 10.0);
        assert_eq!(cfg.remote.unwrap().top_p(), Some(0.9));
        assert!(ConfigFile::parse("bogus = 1").is_err());
        assert!(ConfigFile::parse("[remote]\nendpoint = \"x\"\nmodel = \"m\"\napi_key = \"secret\"").is_err());
    }
}
