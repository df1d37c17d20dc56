use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::LanguageId;

/// Token → occurrence count. Counts are always at least 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFrequencyVector {
    entries: BTreeMap<String, u32>,
}

impl TokenFrequencyVector {
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut entries = BTreeMap::new();
        for t in tokens {
            if !t.is_empty() {
                *entries.entry(t.to_string()).or_insert(0) += 1;
            }
        }
        TokenFrequencyVector { entries }
    }

    pub fn entries(&self) -> &BTreeMap<String, u32> {
        &self.entries
    }

    pub fn get(&self, token: &str) -> u32 {
        self.entries.get(token).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().map(|&c| c as u64).sum()
    }
}

pub(crate) fn is_identifier_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Maximal identifier runs plus single non-space punctuation characters.
pub fn code_tokens(content: &str) -> impl Iterator<Item = &str> {
    let mut rest = content;
    std::iter::from_fn(move || {
        rest = rest.trim_start();
        let first = rest.chars().next()?;
        let len = if is_identifier_char(first) {
            rest.find(|c: char| !is_identifier_char(c)).unwrap_or(rest.len())
        } else {
            first.len_utf8()
        };
        let (token, tail) = rest.split_at(len);
        rest = tail;
        Some(token)
    })
}

/// Case-sensitive token counts over a code body; comments are kept.
pub fn tokenize_code(content: &str, _lang: LanguageId) -> TokenFrequencyVector {
    TokenFrequencyVector::from_tokens(code_tokens(content))
}

/// Lower-cased alphanumeric words of at least two characters.
pub fn text_tokens(content: &str) -> Vec<String> {
    content
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}
