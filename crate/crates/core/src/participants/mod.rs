//! Virtual survey participants.
//!
//! A [`ParticipantSession`] holds one persona conversation. The persona prompt
//! is the single system message; after it, user and assistant turns alternate.
//! Replies come from any [`ChatBackend`]: the [`synthetic`] persona model, a
//! [`remote`] chat-completion endpoint, or a [`fixture`] replay.

pub mod fixture;
pub mod remote;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::demographics::DemographicProfile;
use crate::error::{Error, Result};

pub const PERSONA_PROMPT_TEMPLATE: &str = "I want you to act as the following character. Answer all of the following questions from the point of view of this character, do not break character. {properties}";

pub const PREFERENCE_PROMPT: &str = "On a scale from 0 to 100, what is your current preference for battery electric vehicles (BEVs)? Please reply with just a single number rating and no additional words or explanations. Score: ";

/// Total replies requested before a measurement is given up.
pub const MAX_PREFERENCE_ATTEMPTS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

/// Anything that can answer a chat transcript.
pub trait ChatBackend {
    /// Short name recorded with each session.
    fn tag(&self) -> &str;

    /// Called once when a participant session starts.
    fn open(&mut self, _profile: &DemographicProfile) -> Result<()> {
        Ok(())
    }

    /// Returns the assistant's reply to `messages`.
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn tag(&self) -> &str {
        (**self).tag()
    }

    fn open(&mut self, profile: &DemographicProfile) -> Result<()> {
        (**self).open(profile)
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        (**self).complete(messages)
    }
}

pub fn persona_prompt(profile: &DemographicProfile) -> String {
    PERSONA_PROMPT_TEMPLATE.replace("{properties}", &profile.format_properties())
}

/// First maximal run of ASCII digits, accepted when it parses to 0..=100.
///
/// `"70.5"` reads as 70 and `"-5"` as 5. A run that overflows or exceeds 100
/// rejects the whole reply; later numbers are not considered.
pub fn extract_preference(text: &str) -> Option<u8> {
    let start = text.find(|c: char| c.is_ascii_digit())?;
    let run = &text[start..];
    let end = run.find(|c: char| !c.is_ascii_digit()).unwrap_or(run.len());
    let value: u32 = run[..end].parse().ok()?;
    u8::try_from(value).ok().filter(|v| *v <= 100)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceReading {
    pub value: u8,
    pub raw_text: String,
    pub attempts: u32,
    /// Replies that held no usable number, in the order received.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<String>,
}

/// One persona conversation.
pub struct ParticipantSession<'b> {
    profile: DemographicProfile,
    transcript: Vec<ChatMessage>,
    backend: &'b mut dyn ChatBackend,
}

impl std::fmt::Debug for ParticipantSession<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParticipantSession")
            .field("profile", &self.profile)
            .field("transcript", &self.transcript)
            .field("backend", &self.backend.tag())
            .finish()
    }
}

impl<'b> ParticipantSession<'b> {
    pub fn open(profile: DemographicProfile, backend: &'b mut dyn ChatBackend) -> Result<Self> {
        profile.check_complete()?;
        backend.open(&profile)?;
        let transcript = vec![ChatMessage::system(persona_prompt(&profile))];
        Ok(Self {
            profile,
            transcript,
            backend,
        })
    }

    pub fn profile(&self) -> &DemographicProfile {
        &self.profile
    }

    pub fn transcript(&self) -> &[ChatMessage] {
        &self.transcript
    }

    pub fn into_transcript(self) -> Vec<ChatMessage> {
        self.transcript
    }

    pub fn backend_tag(&self) -> &str {
        self.backend.tag()
    }

    /// Asks the preference question, re-sampling the reply until a number
    /// appears or [`MAX_PREFERENCE_ATTEMPTS`] replies have been rejected.
    ///
    /// Rejected replies are not added to the transcript; on success the
    /// accepted reply is.
    pub fn measure_preference(&mut self) -> Result<PreferenceReading> {
        self.transcript.push(ChatMessage::user(PREFERENCE_PROMPT));
        let mut rejected = Vec::new();
        for attempt in 1..=MAX_PREFERENCE_ATTEMPTS {
            let reply = self.backend.complete(&self.transcript)?;
            match extract_preference(&reply) {
                Some(value) => {
                    self.transcript.push(ChatMessage::assistant(reply.clone()));
                    return Ok(PreferenceReading {
                        value,
                        raw_text: reply,
                        attempts: attempt,
                        rejected,
                    });
                }
                None => {
                    log::debug!("no preference in reply {attempt}: {reply:?}");
                    rejected.push(reply);
                }
            }
        }
        Err(Error::InvalidTrial { replies: rejected })
    }

    /// Sends the intervention as a user turn and returns the participant's
    /// acknowledgment.
    pub fn deliver_intervention(&mut self, text: &str) -> Result<String> {
        if text.trim().is_empty() {
            return Err(Error::Usage("intervention text is empty".into()));
        }
        self.transcript.push(ChatMessage::user(text));
        let ack = self.backend.complete(&self.transcript)?;
        self.transcript.push(ChatMessage::assistant(ack.clone()));
        Ok(ack)
    }
}

/// Replies from a fixed script, for tests and canned fixtures.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    replies: std::collections::VecDeque<String>,
    pub calls: Vec<Vec<ChatMessage>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: replies.into_iter().map(Into::into).collect(),
            calls: Vec::new(),
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn tag(&self) -> &str {
        "scripted"
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        self.calls.push(messages.to_vec());
        self.replies
            .pop_front()
            .ok_or_else(|| Error::Protocol("scripted backend ran out of replies".into()))
    }
}
