use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatSession, SamplingParams};

/// What a rule does once its replies have been handed out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyMode {
    /// Each reply is used once; the rule is then skipped.
    #[default]
    Once,
    /// Replies repeat from the start.
    Cycle,
    /// The final reply is repeated forever.
    RepeatLast,
}

/// A canned reply list selected by a substring of the request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRule {
    /// Matched against the last message, then the system prompt. Empty
    /// matches every request.
    #[serde(default)]
    pub fingerprint: String,
    pub replies: Vec<String>,
    #[serde(default)]
    pub mode: ReplyMode,
}

/// Serialized form of a scripted backend.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScriptedFixture {
    pub rules: Vec<FixtureRule>,
}

/// Deterministic backend replaying canned replies. Rules are tried in order;
/// the first one whose fingerprint matches and which still has a reply wins.
#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<FixtureRule>,
    cursors: RefCell<Vec<usize>>,
    calls: RefCell<Vec<ChatSession>>,
    record: bool,
}

impl ScriptedBackend {
    pub fn new(fixture: ScriptedFixture) -> Self {
        let n = fixture.rules.len();
        Self {
            rules: fixture.rules,
            cursors: RefCell::new(alloc::vec![0; n]),
            calls: RefCell::new(Vec::new()),
            record: false,
        }
    }

    /// Answers every request from one queue, in order.
    pub fn queue<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(ScriptedFixture {
            rules: alloc::vec![FixtureRule {
                fingerprint: String::new(),
                replies: replies.into_iter().map(Into::into).collect(),
                mode: ReplyMode::Once,
            }],
        })
    }

    /// Keeps a copy of every request for inspection in tests.
    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn calls(&self) -> Vec<ChatSession> {
        self.calls.borrow().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.borrow().len()
    }

    fn matches(rule: &FixtureRule, session: &ChatSession) -> bool {
        if rule.fingerprint.is_empty() {
            return true;
        }
        let in_last = session
            .last_message()
            .is_some_and(|m| m.content.contains(rule.fingerprint.as_str()));
        in_last
            || session
                .system_prompt()
                .is_some_and(|s| s.contains(rule.fingerprint.as_str()))
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(&self, session: &ChatSession, _params: SamplingParams) -> Result<String, BackendError> {
        if self.record {
            self.calls.borrow_mut().push(session.clone());
        }
        let mut cursors = self.cursors.borrow_mut();
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.replies.is_empty() || !Self::matches(rule, session) {
                continue;
            }
            let c = cursors[i];
            let reply = match rule.mode {
                ReplyMode::Once if c >= rule.replies.len() => continue,
                ReplyMode::Once => &rule.replies[c],
                ReplyMode::Cycle => &rule.replies[c % rule.replies.len()],
                ReplyMode::RepeatLast => &rule.replies[c.min(rule.replies.len() - 1)],
            };
            cursors[i] = c + 1;
            return Ok(reply.clone());
        }
        let hint = session
            .last_message()
            .map(|m| m.content.chars().take(60).collect::<String>())
            .unwrap_or_default();
        Err(BackendError::Unavailable(
            ["no scripted reply for request starting `", &hint, "`"]
                .concat()
                .to_string(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{complete, GatewayError};
    use alloc::vec;

    fn session(text: &str) -> ChatSession {
        ChatSession::single(text)
    }

    #[test]
    fn queue_replays_in_order() {
        let b = ScriptedBackend::queue(["Client: Hello"]);
        let got = complete(&b, &session("Counselor: Hi"), SamplingParams::GENERATION, 3);
        assert_eq!(got.unwrap(), "Client: Hello");
    }

    #[test]
    fn exhausted_queue_is_unavailable() {
        let b = ScriptedBackend::queue(Vec::<String>::new());
        assert!(matches!(
            complete(&b, &session("Counselor: Hi"), SamplingParams::GENERATION, 3),
            Err(GatewayError::BackendUnavailable { attempts: 1, .. })
        ));
    }

    #[test]
    fn fingerprints_route_requests() {
        let b = ScriptedBackend::new(ScriptedFixture {
            rules: vec![
                FixtureRule {
                    fingerprint: "moderator".into(),
                    replies: vec!["No".into()],
                    mode: ReplyMode::RepeatLast,
                },
                FixtureRule {
                    fingerprint: "You are the client".into(),
                    replies: vec!["a".into(), "b".into()],
                    mode: ReplyMode::Cycle,
                },
            ],
        });
        let mut chat = ChatSession::new("You are the client");
        chat.push_user("Counselor: hi");
        let p = SamplingParams::GENERATION;
        assert_eq!(b.chat(&chat, p).unwrap(), "a");
        assert_eq!(b.chat(&chat, p).unwrap(), "b");
        assert_eq!(b.chat(&chat, p).unwrap(), "a");
        let m = session("you are the moderator");
        assert_eq!(b.chat(&m, p).unwrap(), "No");
        assert_eq!(b.chat(&m, p).unwrap(), "No");
    }

    #[test]
    fn once_rules_fall_through_when_spent() {
        let b = ScriptedBackend::new(ScriptedFixture {
            rules: vec![
                FixtureRule {
                    fingerprint: "x".into(),
                    replies: vec!["first".into()],
                    mode: ReplyMode::Once,
                },
                FixtureRule {
                    fingerprint: String::new(),
                    replies: vec!["fallback".into()],
                    mode: ReplyMode::RepeatLast,
                },
            ],
        })
        .recording();
        let p = SamplingParams::JUDGE;
        assert_eq!(b.chat(&session("x"), p).unwrap(), "first");
        assert_eq!(b.chat(&session("x"), p).unwrap(), "fallback");
        assert_eq!(b.call_count(), 2);
    }

    #[test]
    fn fixture_json_shape() {
        let f: ScriptedFixture = serde_json::from_str(
            r#"{"rules":[{"fingerprint":"a","replies":["r"],"mode":"repeat_last"},{"replies":["q"]}]}"#,
        )
        .unwrap();
        assert_eq!(f.rules[0].mode, ReplyMode::RepeatLast);
        assert_eq!(f.rules[1].mode, ReplyMode::Once);
    }
}
