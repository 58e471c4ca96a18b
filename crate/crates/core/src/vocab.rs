//! Token vocabulary and tokenization.
//!
//! Id layout: user tokens in the given order, then the reserved tokens
//! `<pad>`, `<bos>`, `<eos>`, `<sep>`, then one `<task:NAME>` tag per
//! registered task direction. The vocabulary serializes as the full token
//! list in id order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TokenId = u32;
pub type Sequence = Vec<TokenId>;

pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<sep>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Longest-match over vocabulary entries, so "Cl" and "Br" stay whole.
    Char,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    n_user: usize,
    max_unit_chars: usize,
}

fn task_token(name: &str) -> String {
    format!("<task:{name}>")
}

impl Vocab {
    pub fn build<S: AsRef<str>>(user: &[S], tasks: &[S]) -> Result<Self> {
        if user.is_empty() {
            return Err(Error::EmptyVocab);
        }
        let mut tokens: Vec<String> = user.iter().map(|s| s.as_ref().to_string()).collect();
        tokens.extend(RESERVED.iter().map(|s| s.to_string()));
        tokens.extend(tasks.iter().map(|t| task_token(t.as_ref())));
        Self::from_parts(tokens, user.len())
    }

    fn from_parts(tokens: Vec<String>, n_user: usize) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::BadVocabList("empty token".into()));
            }
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::DuplicateToken(t.clone()));
            }
        }
        let max_unit_chars = tokens[..n_user]
            .iter()
            .map(|t| t.chars().count())
            .max()
            .unwrap_or(1);
        Ok(Vocab {
            tokens,
            index,
            n_user,
            max_unit_chars,
        })
    }

    /// Rebuilds a vocabulary from its serialized token list.
    pub fn from_token_list(tokens: Vec<String>) -> Result<Self> {
        let n_user = tokens
            .iter()
            .position(|t| t == RESERVED[0])
            .ok_or_else(|| Error::BadVocabList("missing <pad>".into()))?;
        if n_user == 0 {
            return Err(Error::EmptyVocab);
        }
        for (k, r) in RESERVED.iter().enumerate() {
            if tokens.get(n_user + k).map(String::as_str) != Some(*r) {
                return Err(Error::BadVocabList(format!(
                    "expected {r} at id {}",
                    n_user + k
                )));
            }
        }
        for t in &tokens[n_user + RESERVED.len()..] {
            if !(t.starts_with("<task:") && t.ends_with('>')) {
                return Err(Error::BadVocabList(format!(
                    "unexpected trailing token {t:?}"
                )));
            }
        }
        Self::from_parts(tokens, n_user)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn user_len(&self) -> usize {
        self.n_user
    }

    pub fn pad(&self) -> TokenId {
        self.n_user as TokenId
    }

    pub fn bos(&self) -> TokenId {
        self.n_user as TokenId + 1
    }

    pub fn eos(&self) -> TokenId {
        self.n_user as TokenId + 2
    }

    pub fn sep(&self) -> TokenId {
        self.n_user as TokenId + 3
    }

    pub fn is_reserved(&self, id: TokenId) -> bool {
        id as usize >= self.n_user
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn task_names(&self) -> Vec<&str> {
        self.tokens[self.n_user + RESERVED.len()..]
            .iter()
            .map(|t| &t[6..t.len() - 1])
            .collect()
    }

    pub fn task(&self, name: &str) -> Result<TokenId> {
        self.id(&task_token(name))
            .ok_or_else(|| Error::UnregisteredTask(name.to_string()))
    }

    /// Hex SHA-256 of the serialized token list; stored in checkpoints to
    /// detect vocabulary or task-registry drift.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.tokens).expect("strings serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn tokenize(&self, text: &str, scheme: Scheme) -> Result<Sequence> {
        match scheme {
            Scheme::Whitespace => text
                .split_whitespace()
                .enumerate()
                .map(|(i, w)| self.user_id(w, i))
                .collect(),
            Scheme::Char => {
                let chars: Vec<(usize, char)> = text.char_indices().collect();
                let mut out = Vec::new();
                let mut i = 0;
                while i < chars.len() {
                    let mut matched = None;
                    for width in (1..=self.max_unit_chars.min(chars.len() - i)).rev() {
                        let start = chars[i].0;
                        let end = chars.get(i + width).map_or(text.len(), |c| c.0);
                        if let Ok(id) = self.user_id(&text[start..end], i) {
                            matched = Some((id, width));
                            break;
                        }
                    }
                    let (id, width) = matched.ok_or_else(|| Error::OutOfVocabulary {
                        unit: chars[i].1.to_string(),
                        offset: i,
                    })?;
                    out.push(id);
                    i += width;
                }
                Ok(out)
            }
        }
    }

    fn user_id(&self, unit: &str, offset: usize) -> Result<TokenId> {
        match self.index.get(unit) {
            Some(&id) if (id as usize) < self.n_user => Ok(id),
            _ => Err(Error::OutOfVocabulary {
                unit: unit.to_string(),
                offset,
            }),
        }
    }

    /// Reserved tokens render as their bracketed names, so malformed outputs
    /// stay visible to format checks.
    pub fn detokenize(&self, seq: &[TokenId], scheme: Scheme) -> String {
        let sep = match scheme {
            Scheme::Char => "",
            Scheme::Whitespace => " ",
        };
        seq.iter()
            .map(|&id| self.token(id).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(sep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smiles_vocab() -> Vocab {
        Vocab::build(&["C", "O", "Cl", "(", ")", "="], &["fwd", "bwd"]).unwrap()
    }

    #[test]
    fn layout_and_bijection() {
        let v = Vocab::build(&["C", "O"], &[] as &[&str]).unwrap();
        assert_eq!(v.len(), 2 + RESERVED.len());
        let v = smiles_vocab();
        for i in 0..v.len() as TokenId {
            assert_eq!(v.id(v.token(i).unwrap()), Some(i));
        }
        assert_eq!(v.token(v.eos()), Some("<eos>"));
        assert_eq!(v.task_names(), vec!["fwd", "bwd"]);
        assert_eq!(v.task("bwd").unwrap() as usize, v.len() - 1);
        assert!(matches!(v.task("x"), Err(Error::UnregisteredTask(_))));
    }

    #[test]
    fn duplicates_rejected() {
        let err = Vocab::build(&["C", "C"], &[] as &[&str]).unwrap_err();
        assert!(matches!(err, Error::DuplicateToken(ref t) if t == "C"));
        let err = Vocab::build(&["<eos>"], &[] as &[&str]).unwrap_err();
        assert!(matches!(err, Error::DuplicateToken(_)));
    }

    #[test]
    fn char_tokenization() {
        let v = smiles_vocab();
        let ids = v.tokenize("CCO", Scheme::Char).unwrap();
        assert_eq!(ids, vec![0, 0, 1]);
        let ids = v.tokenize("ClC(=O)", Scheme::Char).unwrap();
        assert_eq!(ids.len(), 6);
        assert_eq!(v.detokenize(&ids, Scheme::Char), "ClC(=O)");
        match v.tokenize("CX", Scheme::Char) {
            Err(Error::OutOfVocabulary { unit, offset }) => {
                assert_eq!((unit.as_str(), offset), ("X", 1))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn whitespace_tokenization() {
        let v = Vocab::build(&["a", "b"], &[] as &[&str]).unwrap();
        assert_eq!(v.tokenize("a b", Scheme::Whitespace).unwrap(), vec![0, 1]);
        let ids = v.tokenize("  a \t b ", Scheme::Whitespace).unwrap();
        assert_eq!(v.detokenize(&ids, Scheme::Whitespace), "a b");
        // reserved tokens are not user units
        assert!(v.tokenize("<eos>", Scheme::Whitespace).is_err());
    }

    #[test]
    fn token_list_round_trip() {
        let v = smiles_vocab();
        let back = Vocab::from_token_list(v.tokens().to_vec()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
        let mut broken = v.tokens().to_vec();
        broken.swap(6, 7);
        assert!(Vocab::from_token_list(broken).is_err());
    }
}
