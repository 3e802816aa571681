//! HTTP client for an external antonym rewriter.
//!
//! Request body: `{"prompt": str, "caption": str}`.
//! Reply body: `{"caption_forward": str, "caption_reverse": str | null}`, where a
//! null or literal `"None"` reverse caption means the action has no temporal antonym.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::miner::{MinedCaption, RewriteResult, Rewriter};

/// Instruction prompt sent ahead of every caption.
pub const ANTONYM_PROMPT: &str = include_str!("../data/antonym_prompt.txt");

#[derive(Debug, Clone)]
pub struct LlmConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
}

impl LlmConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        LlmConfig {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    prompt: &'a str,
    caption: &'a str,
}

#[derive(Deserialize)]
struct Reply {
    #[allow(dead_code)]
    caption_forward: Option<String>,
    caption_reverse: Option<String>,
}

/// Parses a rewriter reply for `original`. `Ok(None)` means no antonym exists.
pub fn parse_reply(original: &str, body: &str) -> Result<Option<String>> {
    let reply: Reply =
        serde_json::from_str(body).map_err(|e| Error::BadReply(format!("{e}: {body:?}")))?;
    let Some(reverse) = reply.caption_reverse else {
        return Ok(None);
    };
    let reverse = reverse.trim();
    if reverse.is_empty() {
        return Err(Error::BadReply("empty caption_reverse".into()));
    }
    if reverse == "None" {
        return Ok(None);
    }
    if reverse == original.trim() {
        return Err(Error::EchoRejected(original.to_string()));
    }
    Ok(Some(reverse.to_string()))
}

/// Blocking client; safe to share across threads.
#[derive(Debug, Clone)]
pub struct LlmClient {
    config: LlmConfig,
    agent: ureq::Agent,
}

impl LlmClient {
    pub fn new(config: LlmConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        LlmClient { config, agent }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn post(&self, caption: &str) -> std::result::Result<String, ureq::Error> {
        let body = Request {
            prompt: ANTONYM_PROMPT,
            caption,
        };
        self.agent
            .post(&self.config.endpoint)
            .send_json(&body)?
            .body_mut()
            .read_to_string()
    }

    /// Sends one caption, retrying transport failures with exponential backoff.
    pub fn request(&self, caption: &str) -> Result<String> {
        let attempts = self.config.retries + 1;
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.post(caption) {
                Ok(body) => return Ok(body),
                Err(e) => {
                    log::warn!("rewriter attempt {attempt}/{attempts} failed: {e}");
                    last = e.to_string();
                }
            }
            if attempt < attempts {
                thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(Error::Transport {
            attempts,
            message: last,
        })
    }

    pub fn rewrite(&self, caption: &str) -> Result<Option<String>> {
        let body = self.request(caption)?;
        parse_reply(caption, &body)
    }
}

pub fn rewrite_antonym_external(mined: &MinedCaption, client: &LlmClient) -> Result<RewriteResult> {
    let antonym = client.rewrite(&mined.caption.text)?;
    Ok(RewriteResult {
        original: mined.caption.text.clone(),
        diagnostic: antonym.is_none().then(|| "rewriter returned None".to_string()),
        antonym,
        rewriter: Rewriter::External,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_with_antonym() {
        let body = r##"{"caption_forward":"#C C folds the cloth","caption_reverse":"#C C unfolds the cloth"}"##;
        assert_eq!(
            parse_reply("#C C folds the cloth", body).unwrap().as_deref(),
            Some("#C C unfolds the cloth")
        );
    }

    #[test]
    fn none_reply_is_absent() {
        let body = r##"{"caption_forward":"#C C checks the cloth","caption_reverse":"None"}"##;
        assert_eq!(parse_reply("#C C checks the cloth", body).unwrap(), None);
        let body = r##"{"caption_forward":"x","caption_reverse":null}"##;
        assert_eq!(parse_reply("x", body).unwrap(), None);
    }

    #[test]
    fn echo_is_rejected() {
        let body = r#"{"caption_forward":"a b","caption_reverse":"a b"}"#;
        let err = parse_reply("a b", body).unwrap_err();
        assert!(err.to_string().starts_with("echo rejected"));
    }

    #[test]
    fn garbage_is_bad_reply() {
        assert!(matches!(parse_reply("x", "None"), Err(Error::BadReply(_))));
    }

    #[test]
    fn prompt_lists_in_context_examples() {
        assert!(ANTONYM_PROMPT.contains("#C C unfolds the cloth"));
        assert!(ANTONYM_PROMPT.contains("caption_reverse"));
    }
}
