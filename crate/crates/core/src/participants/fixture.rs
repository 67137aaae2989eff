//! Recorded chat exchanges: one `{"request": …, "response": …}` object per line.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::remote::{ChatRequest, ChatResponse, RemoteSettings};
use super::{ChatBackend, ChatMessage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request: ChatRequest,
    pub response: ChatResponse,
}

pub fn read_fixture(path: &Path) -> Result<Vec<FixtureEntry>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| Error::Log {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn write_fixture(path: &Path, entries: &[FixtureEntry]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Wraps a backend and records each exchange as it would go over the wire.
pub struct RecordingBackend<B> {
    inner: B,
    settings: RemoteSettings,
    entries: Vec<FixtureEntry>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, settings: RemoteSettings) -> Self {
        Self {
            inner,
            settings,
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[FixtureEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<FixtureEntry> {
        self.entries
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn tag(&self) -> &str {
        self.inner.tag()
    }

    fn open(&mut self, profile: &crate::DemographicProfile) -> Result<()> {
        self.inner.open(profile)
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        let reply = self.inner.complete(messages)?;
        self.entries.push(FixtureEntry {
            request: self.settings.request(messages),
            response: ChatResponse::from_content(reply.clone()),
        });
        Ok(reply)
    }
}

/// Plays recorded responses back in order, checking that each request's
/// messages match the recording.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    entries: VecDeque<FixtureEntry>,
    position: usize,
}

impl ReplayBackend {
    pub fn new(entries: Vec<FixtureEntry>) -> Self {
        Self {
            entries: entries.into(),
            position: 0,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::new(read_fixture(path)?))
    }

    pub fn remaining(&self) -> usize {
        self.entries.len()
    }
}

impl ChatBackend for ReplayBackend {
    fn tag(&self) -> &str {
        "replay"
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        self.position += 1;
        let entry = self
            .entries
            .pop_front()
            .ok_or_else(|| Error::Protocol(format!("fixture exhausted at exchange {}", self.position)))?;
        if entry.request.messages != messages {
            return Err(Error::Protocol(format!(
                "exchange {} does not match the recorded request",
                self.position
            )));
        }
        Ok(entry.response.first_content()?.to_string())
    }
}
