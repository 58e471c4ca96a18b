use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChemError {
    #[error("empty SMILES string")]
    Empty,
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("ring closure {label} was never closed")]
    UnmatchedRingClosure { label: u32 },
    #[error("ring closure {label} has conflicting bond symbols")]
    RingBondConflict { label: u32 },
    #[error("unbalanced parenthesis at position {pos}")]
    UnbalancedParenthesis { pos: usize },
    #[error("valence violation on atom {atom}")]
    Valence { atom: usize },
    #[error("multi-component input ('.' at position {pos})")]
    MultiComponent { pos: usize },
    #[error("aromatic atom {atom} is not on a ring")]
    AromaticOutsideRing { atom: usize },
    #[error("aromatic bond between non-aromatic atoms {a} and {b}")]
    AromaticBond { a: usize, b: usize },
    #[error("duplicate bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
    #[error("self-loop on atom {atom}")]
    SelfLoop { atom: usize },
    #[error("bond references missing atom {atom}")]
    AtomOutOfRange { atom: usize },
    #[error("too many simultaneously open ring closures")]
    TooManyRings,
    #[error("reaction SMILES needs exactly two '>' separators, found {found}")]
    ReactionSeparators { found: usize },
    #[error("reaction has no products")]
    EmptyProducts,
    #[error("component {index} of {field}: {source}")]
    Component {
        field: &'static str,
        index: usize,
        #[source]
        source: Box<ChemError>,
    },
}
