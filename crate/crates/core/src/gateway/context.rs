use std::collections::VecDeque;

use super::{one_shot_pair, ChatMessage};

/// Number of recent user/assistant pairs kept beneath the pinned prompts.
pub const HISTORY_CAPACITY: usize = 5;

/// System prompt + pinned one-shot pair + a sliding window of exchanges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    system: ChatMessage,
    shot_user: ChatMessage,
    shot_assistant: ChatMessage,
    history: VecDeque<(ChatMessage, ChatMessage)>,
    capacity: usize,
    /// Optional character budget for a whole request; oldest pairs are
    /// dropped from the request (not from the window) to fit.
    pub max_chars: Option<usize>,
}

impl ContextWindow {
    /// A window using the shipped one-shot example.
    pub fn new(system_prompt: impl Into<String>) -> Self {
        let (u, a) = one_shot_pair();
        Self::with_shot(system_prompt, u, a)
    }

    pub fn with_shot(system_prompt: impl Into<String>, shot_user: ChatMessage, shot_assistant: ChatMessage) -> Self {
        Self {
            system: ChatMessage::system(system_prompt),
            shot_user,
            shot_assistant,
            history: VecDeque::with_capacity(HISTORY_CAPACITY),
            capacity: HISTORY_CAPACITY,
            max_chars: None,
        }
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> impl Iterator<Item = &(ChatMessage, ChatMessage)> {
        self.history.iter()
    }

    pub fn pinned(&self) -> [&ChatMessage; 3] {
        [&self.system, &self.shot_user, &self.shot_assistant]
    }

    /// Pinned messages followed by the history, oldest first.
    pub fn view(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(3 + 2 * self.history.len());
        out.extend(self.pinned().into_iter().cloned());
        for (u, a) in &self.history {
            out.push(u.clone());
            out.push(a.clone());
        }
        out
    }

    /// The full request for a new user payload, trimmed to `max_chars` by
    /// dropping the oldest exchanges first.
    pub fn request(&self, user_payload: &str) -> Vec<ChatMessage> {
        let pinned: usize = self.pinned().iter().map(|m| m.content.len()).sum();
        let mut skip = 0;
        if let Some(budget) = self.max_chars {
            let mut total = pinned
                + user_payload.len()
                + self
                    .history
                    .iter()
                    .map(|(u, a)| u.content.len() + a.content.len())
                    .sum::<usize>();
            for (u, a) in &self.history {
                if total <= budget {
                    break;
                }
                total -= u.content.len() + a.content.len();
                skip += 1;
            }
        }
        let mut out = Vec::with_capacity(4 + 2 * self.history.len());
        out.extend(self.pinned().into_iter().cloned());
        for (u, a) in self.history.iter().skip(skip) {
            out.push(u.clone());
            out.push(a.clone());
        }
        out.push(ChatMessage::user(user_payload));
        out
    }

    /// Records a finished exchange. Only the lines that executed belong in
    /// the assistant turn; an exchange with none is still kept (as empty
    /// content) so the user/assistant pairing stays uniform.
    pub fn commit_exchange(&mut self, user_payload: &str, executed_lines: &[String]) {
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back((
            ChatMessage::user(user_payload),
            ChatMessage::assistant(executed_lines.join("\n")),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Role;

    #[test]
    fn view_lengths() {
        let mut w = ContextWindow::new("sys");
        assert_eq!(w.view().len(), 3);
        w.commit_exchange("u1", &["A();".into()]);
        assert_eq!(w.view().len(), 5);
        for i in 2..=8 {
            w.commit_exchange(&format!("u{i}"), &[]);
        }
        let v = w.view();
        assert_eq!(v.len(), 13);
        let users: Vec<_> = v[3..]
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect();
        assert_eq!(users, ["u4", "u5", "u6", "u7", "u8"]);
        assert_eq!(v[4].content, "");
    }

    #[test]
    fn request_trims_oldest_first() {
        let mut w = ContextWindow::with_shot("s", ChatMessage::user("u"), ChatMessage::assistant("a"));
        for i in 0..3 {
            w.commit_exchange(&format!("{i}{i}{i}{i}"), &["xxxx".into()]);
        }
        assert_eq!(w.request("new").len(), 3 + 6 + 1);
        // pinned 3 + new 3 + one pair of 8
        w.max_chars = Some(14);
        let r = w.request("new");
        assert_eq!(r.len(), 3 + 2 + 1);
        assert_eq!(r[3].content, "2222");
        w.max_chars = Some(1);
        assert_eq!(w.request("new").len(), 4);
        assert_eq!(w.history_len(), 3);
    }
}
