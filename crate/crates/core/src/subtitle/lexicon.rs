use std::collections::HashMap;
use std::fmt;

use super::SubtitleError;

/// Token id of a navigation phrase. Ids are dense from 1; 0 means "no
/// navigation" and is never produced by [`NavigationLexicon::extract`].
pub type TokenId = u32;

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.txt");

/// Directional phrases ("on your left", "in front of", ...) matched in cue
/// text. Phrases are stored lowercase with single spaces between words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NavigationLexicon {
    phrases: Vec<String>,
    index: HashMap<String, TokenId>,
    longest: usize,
}

/// Lowercases and splits text into words. Anything that is not alphanumeric
/// or an apostrophe separates words, so punctuation never blocks a match.
fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl NavigationLexicon {
    pub fn from_phrases<I, S>(phrases: I) -> Result<Self, SubtitleError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Self {
            phrases: Vec::new(),
            index: HashMap::new(),
            longest: 0,
        };
        for (i, raw) in phrases.into_iter().enumerate() {
            let ws = words(raw.as_ref());
            if ws.is_empty() {
                return Err(SubtitleError::Lexicon(format!(
                    "phrase {} is empty",
                    i + 1
                )));
            }
            let canon = ws.join(" ");
            if out.index.contains_key(&canon) {
                return Err(SubtitleError::Lexicon(format!(
                    "duplicate phrase {canon:?}"
                )));
            }
            out.longest = out.longest.max(ws.len());
            out.phrases.push(canon.clone());
            out.index.insert(canon, out.phrases.len() as TokenId);
        }
        if out.phrases.is_empty() {
            return Err(SubtitleError::Lexicon("lexicon has no phrases".into()));
        }
        Ok(out)
    }

    /// Parses the lexicon file format: one phrase per line, `#` starts a
    /// comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, SubtitleError> {
        let lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        Self::from_phrases(lines)
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn id(&self, phrase: &str) -> Option<TokenId> {
        self.index.get(&words(phrase).join(" ")).copied()
    }

    pub fn phrase(&self, id: TokenId) -> Option<&str> {
        let i = (id as usize).checked_sub(1)?;
        self.phrases.get(i).map(String::as_str)
    }

    pub fn phrases(&self) -> impl Iterator<Item = (TokenId, &str)> {
        self.phrases
            .iter()
            .enumerate()
            .map(|(i, p)| (i as TokenId + 1, p.as_str()))
    }

    /// Left-to-right scan emitting the longest phrase that starts at each word,
    /// skipping the words it covers.
    pub fn extract(&self, text: &str) -> Vec<TokenId> {
        let ws = words(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < ws.len() {
            let max_len = self.longest.min(ws.len() - i);
            let hit = (1..=max_len)
                .rev()
                .find_map(|len| self.index.get(&ws[i..i + len].join(" ")).map(|&id| (id, len)));
            match hit {
                Some((id, len)) => {
                    out.push(id);
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

impl Default for NavigationLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

impl fmt::Display for NavigationLexicon {
    /// Writes the lexicon in its file format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.phrases {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}
