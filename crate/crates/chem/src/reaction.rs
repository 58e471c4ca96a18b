//! Reaction SMILES: `reactants>reagents>products`.

use crate::error::ChemError;
use crate::molecule::Molecule;
use crate::smiles::parse_smiles;

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub reactants: Vec<Molecule>,
    pub reagents: Vec<Molecule>,
    pub products: Vec<Molecule>,
}

fn parse_field(field: &'static str, text: &str) -> Result<Vec<Molecule>, ChemError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split('.')
        .enumerate()
        .map(|(index, part)| {
            parse_smiles(part).map_err(|e| ChemError::Component {
                field,
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Parses a reaction SMILES. Empty reactant or reagent fields are allowed;
/// products must be present. Element balance is not checked.
pub fn parse_reaction(s: &str) -> Result<Reaction, ChemError> {
    let fields: Vec<&str> = s.split('>').collect();
    if fields.len() != 3 {
        return Err(ChemError::ReactionSeparators {
            found: fields.len() - 1,
        });
    }
    let reaction = Reaction {
        reactants: parse_field("reactants", fields[0])?,
        reagents: parse_field("reagents", fields[1])?,
        products: parse_field("products", fields[2])?,
    };
    if reaction.products.is_empty() {
        return Err(ChemError::EmptyProducts);
    }
    Ok(reaction)
}
