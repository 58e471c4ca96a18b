//! Domain kinds, bidirectional task pairs and the built-in task registry.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::reward::FormatChecker;
use crate::vocab::{Scheme, TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Molecule,
    /// Dot-separated molecule sets (reactant or product sides).
    Reaction,
    Text,
    /// Plain symbol strings, one character per token.
    Symbols,
}

impl DomainKind {
    pub fn scheme(self) -> Scheme {
        match self {
            DomainKind::Text => Scheme::Whitespace,
            _ => Scheme::Char,
        }
    }
}

/// A forward/backward task: `forward` maps source to target, `backward`
/// maps target back to source.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPair {
    pub name: String,
    pub forward: TokenId,
    pub backward: TokenId,
    pub source: DomainKind,
    pub target: DomainKind,
    pub forward_checker: FormatChecker,
    pub backward_checker: FormatChecker,
}

impl TaskPair {
    /// The same pair with the roles of the two directions exchanged.
    pub fn swap(&self) -> TaskPair {
        TaskPair {
            name: self.name.clone(),
            forward: self.backward,
            backward: self.forward,
            source: self.target,
            target: self.source,
            forward_checker: self.backward_checker,
            backward_checker: self.forward_checker,
        }
    }
}

/// Symbols used by molecule and reaction vocabularies.
pub const SMILES_TOKENS: [&str; 37] = [
    "C", "c", "N", "n", "O", "o", "S", "s", "P", "p", "B", "b", "F", "Cl", "Br", "I", "H", "1",
    "2", "3", "4", "5", "6", "7", "8", "9", "0", "%", "(", ")", "[", "]", "=", "#", "-", "+", ".",
];

pub fn cipher_alphabets(alphabet: usize) -> (Vec<String>, Vec<String>) {
    let src = (0..alphabet)
        .map(|i| ((b'a' + i as u8) as char).to_string())
        .collect();
    let tgt = (0..alphabet)
        .map(|i| ((b'A' + i as u8) as char).to_string())
        .collect();
    (src, tgt)
}

/// Letter cipher: lowercase source alphabet, uppercase target alphabet.
pub fn cipher_task(alphabet: usize) -> Result<(Arc<Vocab>, TaskPair)> {
    let (mut tokens, tgt) = cipher_alphabets(alphabet);
    tokens.extend(tgt);
    let vocab = Arc::new(Vocab::build(
        &tokens,
        &["cipher.fwd".into(), "cipher.bwd".into()],
    )?);
    let pair = TaskPair {
        name: "cipher".into(),
        forward: vocab.task("cipher.fwd")?,
        backward: vocab.task("cipher.bwd")?,
        source: DomainKind::Symbols,
        target: DomainKind::Symbols,
        forward_checker: FormatChecker::Symbols,
        backward_checker: FormatChecker::Symbols,
    };
    Ok((vocab, pair))
}

/// Reaction prediction (reactants to product) and retrosynthesis.
pub fn reaction_task() -> Result<(Arc<Vocab>, TaskPair)> {
    let vocab = Arc::new(Vocab::build(
        &SMILES_TOKENS.map(String::from),
        &["reaction.fwd".into(), "reaction.bwd".into()],
    )?);
    let pair = TaskPair {
        name: "reactions".into(),
        forward: vocab.task("reaction.fwd")?,
        backward: vocab.task("reaction.bwd")?,
        source: DomainKind::Reaction,
        target: DomainKind::Molecule,
        forward_checker: FormatChecker::ReactionPrediction,
        backward_checker: FormatChecker::Retrosynthesis,
    };
    Ok((vocab, pair))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_is_involution() {
        let (_, pair) = reaction_task().unwrap();
        assert_eq!(pair.swap().swap(), pair);
        assert_eq!(pair.swap().forward, pair.backward);
    }

    #[test]
    fn smiles_vocab_tokenizes_halogens() {
        let (v, _) = reaction_task().unwrap();
        let ids = v.tokenize("ClCBr.O", Scheme::Char).unwrap();
        assert_eq!(ids.len(), 5);
    }
}
