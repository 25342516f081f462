//! Transcript replay: completions served strictly in recorded order, each
//! checked against the fingerprint of the prompt that produced it.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionBackend, CompletionRequest, CompletionResult, LlmError, TokenUsage};

/// Stable hash of a prompt with all whitespace runs collapsed to one space.
pub fn fingerprint(prompt: &str) -> String {
    let normalized = prompt.split_whitespace().collect::<Vec<_>>().join(" ");
    let digest = Sha256::digest(normalized.as_bytes());
    hex::encode(&digest[..16])
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fp: String,
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TranscriptEntry {
    pub fn usage(&self) -> TokenUsage {
        TokenUsage::new(self.prompt_tokens, self.completion_tokens)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayTranscript {
    pub entries: Vec<TranscriptEntry>,
}

impl ReplayTranscript {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        ReplayTranscript { entries }
    }

    pub fn push(&mut self, prompt: &str, text: &str, usage: TokenUsage) {
        self.entries.push(TranscriptEntry {
            fp: fingerprint(prompt),
            text: text.to_string(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LlmError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(line).map_err(|e| {
                LlmError::Transcript(format!("line {}: {e}", idx + 1))
            })?;
            entries.push(entry);
        }
        Ok(ReplayTranscript { entries })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("transcript entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let file = fs::File::open(path)
            .map_err(|e| LlmError::Transcript(format!("{}: {e}", path.display())))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| LlmError::Transcript(format!("{}: {e}", path.display())))?;
            text.push_str(&line);
            text.push('\n');
        }
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())
    }
}

/// Serves a transcript in order. Single-episode only: concurrent calls are
/// refused rather than interleaved.
#[derive(Debug)]
pub struct ReplayBackend {
    name: String,
    transcript: ReplayTranscript,
    cursor: Mutex<usize>,
}

impl ReplayBackend {
    pub fn new(transcript: ReplayTranscript) -> Self {
        Self::named("replay", transcript)
    }

    pub fn named(name: &str, transcript: ReplayTranscript) -> Self {
        ReplayBackend {
            name: name.to_string(),
            transcript,
            cursor: Mutex::new(0),
        }
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.lock().expect("replay cursor poisoned")
    }

    pub fn remaining(&self) -> usize {
        self.transcript.len() - self.consumed()
    }
}

impl CompletionBackend for ReplayBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let mut cursor = self
            .cursor
            .try_lock()
            .map_err(|_| LlmError::ConcurrentReplay)?;
        let index = *cursor;
        let entry = self
            .transcript
            .entries
            .get(index)
            .ok_or(LlmError::ReplayExhausted { index })?;
        let actual = fingerprint(&request.prompt);
        if actual != entry.fp {
            return Err(LlmError::ReplayMismatch {
                index,
                expected: entry.fp.clone(),
                actual,
            });
        }
        *cursor += 1;
        Ok(CompletionResult {
            text: entry.text.clone(),
            usage: entry.usage(),
        })
    }
}

/// Wraps a backend and records every exchange into a transcript.
#[derive(Debug)]
pub struct RecordingBackend<B> {
    inner: B,
    transcript: Mutex<ReplayTranscript>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            transcript: Mutex::default(),
        }
    }

    pub fn transcript(&self) -> ReplayTranscript {
        self.transcript.lock().expect("recorder poisoned").clone()
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let result = self.inner.complete(request)?;
        self.transcript
            .lock()
            .expect("recorder poisoned")
            .push(&request.prompt, &result.text, result.usage);
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> CompletionRequest {
        CompletionRequest::new(prompt, 16).unwrap()
    }

    #[test]
    fn replays_by_construction() {
        let mut t = ReplayTranscript::default();
        t.push("p1", "go to kitchen", TokenUsage::new(10, 3));
        let backend = ReplayBackend::new(t);
        let got = backend.complete(&req("p1")).unwrap();
        assert_eq!(got.text, "go to kitchen");
        assert_eq!(got.usage, TokenUsage::new(10, 3));
        assert!(matches!(
            backend.complete(&req("p1")),
            Err(LlmError::ReplayExhausted { index: 1 })
        ));
    }

    #[test]
    fn wrong_prompt_is_a_mismatch_at_index_zero() {
        let mut t = ReplayTranscript::default();
        t.push("p1", "x", TokenUsage::default());
        let backend = ReplayBackend::new(t);
        match backend.complete(&req("other")) {
            Err(LlmError::ReplayMismatch { index, expected, .. }) => {
                assert_eq!(index, 0);
                assert_eq!(expected, fingerprint("p1"));
            }
            other => panic!("unexpected {other:?}"),
        }
        // a mismatch does not consume the entry
        assert_eq!(backend.consumed(), 0);
    }

    #[test]
    fn fingerprint_ignores_whitespace_drift() {
        assert_eq!(fingerprint("a  b\n c "), fingerprint("a b c"));
        assert_ne!(fingerprint("a b c"), fingerprint("a b d"));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut t = ReplayTranscript::default();
        t.push("p", "line one\nline \"two\"", TokenUsage::new(4, 5));
        let back = ReplayTranscript::from_jsonl(&t.to_jsonl()).unwrap();
        assert_eq!(back, t);
        assert!(ReplayTranscript::from_jsonl("{not json}").is_err());
    }
}
