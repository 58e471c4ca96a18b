//! Datasets: JSONL records, splits, and seeded toy task generators.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use rtrl_chem::{canonical_smiles, Atom, Bond, BondOrder, Element, Molecule};

use crate::domain::{cipher_alphabets, DomainKind};
use crate::error::{Error, Result};
use crate::rng::{label, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<BTreeMap<String, String>>,
}

impl PairRecord {
    pub fn unlabeled(input: impl Into<String>) -> Self {
        PairRecord {
            input: input.into(),
            output: None,
            meta: None,
        }
    }

    pub fn labeled(input: impl Into<String>, output: impl Into<String>) -> Self {
        PairRecord {
            input: input.into(),
            output: Some(output.into()),
            meta: None,
        }
    }
}

/// Sidecar metadata stored next to a JSONL file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: Option<DomainKind>,
    pub target: Option<DomainKind>,
    pub labeled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<PairRecord>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Checks that either every record has an output or none does.
    pub fn new(
        records: Vec<PairRecord>,
        source: Option<DomainKind>,
        target: Option<DomainKind>,
    ) -> Result<Self> {
        let labeled = records.first().is_some_and(|r| r.output.is_some());
        if let Some(i) = records.iter().position(|r| r.output.is_some() != labeled) {
            return Err(Error::Malformed {
                path: PathBuf::new(),
                line: i + 1,
                msg: "mixed labeled and unlabeled records".into(),
            });
        }
        Ok(Dataset {
            records,
            meta: DatasetMeta {
                source,
                target,
                labeled,
                seed: None,
                generator: None,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labeled(&self) -> bool {
        self.meta.labeled
    }

    pub fn inputs(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.input.as_str()).collect()
    }

    /// (input, output) pairs; fails on the first record without an output.
    pub fn pairs(&self) -> Result<Vec<(String, String)>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.output
                    .clone()
                    .map(|o| (r.input.clone(), o))
                    .ok_or(Error::MissingLabel(i))
            })
            .collect()
    }

    /// Labeled dataset with inputs and outputs exchanged.
    pub fn swapped(&self) -> Result<Dataset> {
        let records = self
            .pairs()?
            .into_iter()
            .map(|(i, o)| PairRecord::labeled(o, i))
            .collect();
        Dataset::new(records, self.meta.target, self.meta.source)
    }

    /// The same inputs without outputs.
    pub fn unlabeled(&self) -> Dataset {
        let records = self
            .records
            .iter()
            .map(|r| PairRecord::unlabeled(r.input.clone()))
            .collect();
        Dataset {
            records,
            meta: DatasetMeta {
                labeled: false,
                ..self.meta.clone()
            },
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            records: self.records[range].to_vec(),
            meta: self.meta.clone(),
        }
    }
}

/// `data/x.jsonl` has its metadata in `data/x.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn load_jsonl(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let rec: PairRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if rec.input.is_empty() {
            return Err(malformed("empty input".into()));
        }
        if let Some(first) = records.first() {
            let first: &PairRecord = first;
            if first.output.is_some() != rec.output.is_some() {
                return Err(malformed("mixed labeled and unlabeled records".into()));
            }
        }
        records.push(rec);
    }
    let mp = meta_path(path);
    let meta: Option<DatasetMeta> = if mp.exists() {
        let raw = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        Some(serde_json::from_str(&raw)?)
    } else {
        None
    };
    let mut ds = Dataset::new(records, None, None)?;
    if let Some(m) = meta {
        ds.meta = DatasetMeta {
            labeled: ds.meta.labeled,
            ..m
        };
    }
    Ok(ds)
}

pub fn save_jsonl(ds: &Dataset, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in &ds.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let mp = meta_path(path);
    let meta = serde_json::to_string_pretty(&ds.meta)? + "\n";
    fs::write(&mp, meta).map_err(|e| Error::io(&mp, e))
}

/// Seeded shuffle, then contiguous cuts of rounded sizes.
pub fn split(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|&f| !(f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::BadFractions);
    }
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, &[label::DATA]));
    let a = ((fractions[0] * n as f64).round() as usize).min(n);
    let b = ((fractions[1] * n as f64).round() as usize).min(n - a);
    let part = |idx: &[usize]| Dataset {
        records: idx.iter().map(|&i| ds.records[i].clone()).collect(),
        meta: ds.meta.clone(),
    };
    Ok((
        part(&order[..a]),
        part(&order[a..a + b]),
        part(&order[a + b..]),
    ))
}

/// A letter-substitution task: source strings over `a..` and their images
/// under a random bijection onto `A..`.
#[derive(Debug, Clone, PartialEq)]
pub struct CipherTask {
    pub alphabet: usize,
    /// `sigma[i]` is the target letter index for source letter `i`.
    pub sigma: Vec<usize>,
    pub x: Dataset,
    pub y: Dataset,
}

impl CipherTask {
    pub fn encrypt(&self, s: &str) -> String {
        s.bytes()
            .map(|b| (b'A' + self.sigma[(b - b'a') as usize] as u8) as char)
            .collect()
    }

    pub fn decrypt(&self, s: &str) -> String {
        let mut inv = vec![0; self.alphabet];
        for (i, &j) in self.sigma.iter().enumerate() {
            inv[j] = i;
        }
        s.bytes()
            .map(|b| (b'a' + inv[(b - b'A') as usize] as u8) as char)
            .collect()
    }

    /// Labeled (x, sigma(x)) records.
    pub fn pairs(&self) -> Dataset {
        let records = self
            .x
            .records
            .iter()
            .zip(&self.y.records)
            .map(|(x, y)| PairRecord::labeled(x.input.clone(), y.input.clone()))
            .collect();
        let mut ds = Dataset::new(
            records,
            Some(DomainKind::Symbols),
            Some(DomainKind::Symbols),
        )
        .expect("homogeneous");
        ds.meta.seed = self.x.meta.seed;
        ds.meta.generator = Some("cipher".into());
        ds
    }
}

pub fn gen_cipher_task(seed: u64, n: usize, alphabet: usize, max_len: usize) -> Result<CipherTask> {
    if !(4..=26).contains(&alphabet) {
        return Err(Error::Generation(format!(
            "alphabet size must be in 4..=26, got {alphabet}"
        )));
    }
    if max_len < 4 {
        return Err(Error::Generation(format!(
            "max_len must be at least 4, got {max_len}"
        )));
    }
    let mut rng = stream(seed, &[label::DATA, 0]);
    let mut sigma: Vec<usize> = (0..alphabet).collect();
    sigma.shuffle(&mut rng);
    let mut seen = BTreeSet::new();
    let mut xs = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while xs.len() < n {
        attempts += 1;
        if attempts > n * 100 + 1000 {
            return Err(Error::Generation(format!(
                "only {} unique cipher inputs",
                xs.len()
            )));
        }
        let len = rng.gen_range(4..=max_len);
        let s: String = (0..len)
            .map(|_| (b'a' + rng.gen_range(0..alphabet) as u8) as char)
            .collect();
        if seen.insert(s.clone()) {
            xs.push(s);
        }
    }
    let mut task = CipherTask {
        alphabet,
        sigma,
        x: Dataset::new(vec![], None, None)?,
        y: Dataset::new(vec![], None, None)?,
    };
    let ys: Vec<String> = xs.iter().map(|x| task.encrypt(x)).collect();
    let mk = |v: Vec<String>| {
        let mut d = Dataset::new(
            v.into_iter().map(PairRecord::unlabeled).collect(),
            Some(DomainKind::Symbols),
            Some(DomainKind::Symbols),
        )
        .expect("homogeneous");
        d.meta.seed = Some(seed);
        d.meta.generator = Some("cipher".into());
        d
    };
    task.x = mk(xs);
    task.y = mk(ys);
    Ok(task)
}

/// Replaces each output character, with probability `rate`, by a uniformly
/// drawn symbol from `symbols` (possibly the same one).
pub fn corrupt_outputs(ds: &Dataset, rate: f64, symbols: &[String], seed: u64) -> Result<Dataset> {
    let mut rng = stream(seed, &[label::DATA, 1]);
    let records = ds
        .pairs()?
        .into_iter()
        .map(|(i, o)| {
            let noisy: String = o
                .chars()
                .map(|c| {
                    if rng.gen_bool(rate) {
                        symbols.choose(&mut rng).expect("non-empty symbols").clone()
                    } else {
                        c.to_string()
                    }
                })
                .collect();
            PairRecord::labeled(i, noisy)
        })
        .collect();
    Dataset::new(records, ds.meta.source, ds.meta.target)
}

/// Target-alphabet symbols of a cipher task.
pub fn cipher_target_symbols(alphabet: usize) -> Vec<String> {
    cipher_alphabets(alphabet).1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionTemplate {
    /// R-X + water -> R-OH
    HalideToAlcohol,
    /// R-OH + R'-C(=O)OH -> R'-C(=O)O-R
    Esterification,
    /// C=C -> C-C
    Hydrogenation,
}

impl ReactionTemplate {
    pub const ALL: [ReactionTemplate; 3] = [
        ReactionTemplate::HalideToAlcohol,
        ReactionTemplate::Esterification,
        ReactionTemplate::Hydrogenation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReactionTemplate::HalideToAlcohol => "halide_to_alcohol",
            ReactionTemplate::Esterification => "esterification",
            ReactionTemplate::Hydrogenation => "hydrogenation",
        }
    }
}

fn rebuild(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Option<Molecule> {
    let bare = atoms
        .into_iter()
        .map(|a| Atom { hydrogens: 0, ..a })
        .collect();
    Molecule::with_implicit_hydrogens(bare, bonds).ok()
}

/// Replaces the first halogen atom by a hydroxyl oxygen.
pub fn substitute_halide(m: &Molecule) -> Option<Molecule> {
    let x = m.atoms().iter().position(|a| {
        matches!(
            a.element,
            Element::F | Element::Cl | Element::Br | Element::I
        )
    })?;
    let mut atoms = m.atoms().to_vec();
    atoms[x] = Atom::new(Element::O);
    rebuild(atoms, m.bonds().to_vec())
}

/// Joins an alcohol and a carboxylic acid into an ester, dropping the acid's
/// hydroxyl oxygen.
pub fn esterify(alcohol: &Molecule, acid: &Molecule) -> Option<Molecule> {
    let is_oh = |m: &Molecule, i: usize| {
        let a = m.atoms()[i];
        a.element == Element::O
            && !a.aromatic
            && a.charge == 0
            && a.hydrogens == 1
            && m.degree(i) == 1
            && m.bonds()[m.neighbors(i)[0].1].order == BondOrder::Single
    };
    let alc_o = (0..alcohol.atom_count()).find(|&i| {
        is_oh(alcohol, i) && alcohol.atoms()[alcohol.neighbors(i)[0].0].element == Element::C
    })?;
    let (acid_c, acid_oh) = (0..acid.atom_count()).find_map(|c| {
        if acid.atoms()[c].element != Element::C {
            return None;
        }
        let nb = acid.neighbors(c);
        let has_carbonyl = nb.iter().any(|&(o, b)| {
            acid.atoms()[o].element == Element::O && acid.bonds()[b].order == BondOrder::Double
        });
        let oh = nb.iter().map(|&(o, _)| o).find(|&o| is_oh(acid, o))?;
        has_carbonyl.then_some((c, oh))
    })?;
    let keep: Vec<usize> = (0..acid.atom_count()).filter(|&i| i != acid_oh).collect();
    let acid_part = acid.induced_subgraph(&keep);
    let new_c = keep.iter().position(|&i| i == acid_c)?;
    let joined = Molecule::union(&[acid_part, alcohol.clone()]);
    let mut bonds = joined.bonds().to_vec();
    bonds.push(Bond {
        a: new_c,
        b: keep.len() + alc_o,
        order: BondOrder::Single,
    });
    rebuild(joined.atoms().to_vec(), bonds)
}

/// Saturates the first carbon-carbon double bond.
pub fn hydrogenate(m: &Molecule) -> Option<Molecule> {
    let k = m.bonds().iter().position(|b| {
        b.order == BondOrder::Double
            && m.atoms()[b.a].element == Element::C
            && m.atoms()[b.b].element == Element::C
    })?;
    let mut bonds = m.bonds().to_vec();
    bonds[k].order = BondOrder::Single;
    rebuild(m.atoms().to_vec(), bonds)
}

/// Random acyclic carbon skeleton with `k` atoms, every degree at most 3.
fn skeleton<R: Rng>(rng: &mut R, k: usize) -> (Vec<Atom>, Vec<Bond>) {
    let mut atoms = vec![Atom::new(Element::C); k];
    let mut degree = vec![0usize; k];
    let mut bonds = Vec::new();
    for i in 1..k {
        let open: Vec<usize> = (0..i).filter(|&j| degree[j] < 3).collect();
        let j = *open.choose(rng).expect("a tree always has an open atom");
        degree[i] += 1;
        degree[j] += 1;
        bonds.push(Bond {
            a: j,
            b: i,
            order: BondOrder::Single,
        });
    }
    atoms.truncate(k);
    (atoms, bonds)
}

/// Attaches a new atom to a skeleton carbon with degree below 3 (or to
/// nothing when the skeleton is empty). Returns the new atom's index.
fn attach<R: Rng>(
    rng: &mut R,
    atoms: &mut Vec<Atom>,
    bonds: &mut Vec<Bond>,
    atom: Atom,
    order: BondOrder,
) -> usize {
    let idx = atoms.len();
    let carbons: Vec<usize> = (0..idx)
        .filter(|&i| {
            atoms[i].element == Element::C
                && bonds.iter().filter(|b| b.a == i || b.b == i).count() < 3
        })
        .collect();
    atoms.push(atom);
    if let Some(&c) = carbons.choose(rng) {
        bonds.push(Bond {
            a: c,
            b: idx,
            order,
        });
    }
    idx
}

fn halide<R: Rng>(rng: &mut R) -> Option<Molecule> {
    let (mut atoms, mut bonds) = {
        let k = rng.gen_range(1..=5);
        skeleton(rng, k)
    };
    let x = *[Element::Cl, Element::Br, Element::I].choose(rng)?;
    attach(rng, &mut atoms, &mut bonds, Atom::new(x), BondOrder::Single);
    rebuild(atoms, bonds)
}

fn alcohol<R: Rng>(rng: &mut R) -> Option<Molecule> {
    let (mut atoms, mut bonds) = {
        let k = rng.gen_range(1..=4);
        skeleton(rng, k)
    };
    attach(
        rng,
        &mut atoms,
        &mut bonds,
        Atom::new(Element::O),
        BondOrder::Single,
    );
    rebuild(atoms, bonds)
}

fn acid<R: Rng>(rng: &mut R) -> Option<Molecule> {
    let (mut atoms, mut bonds) = {
        let k = rng.gen_range(0..=3);
        skeleton(rng, k)
    };
    let c = attach(
        rng,
        &mut atoms,
        &mut bonds,
        Atom::new(Element::C),
        BondOrder::Single,
    );
    for order in [BondOrder::Double, BondOrder::Single] {
        atoms.push(Atom::new(Element::O));
        bonds.push(Bond {
            a: c,
            b: atoms.len() - 1,
            order,
        });
    }
    rebuild(atoms, bonds)
}

fn alkene<R: Rng>(rng: &mut R) -> Option<Molecule> {
    let (atoms, mut bonds) = {
        let k = rng.gen_range(2..=6);
        skeleton(rng, k)
    };
    let k = rng.gen_range(0..bonds.len());
    bonds[k].order = BondOrder::Double;
    rebuild(atoms, bonds)
}

fn join(parts: &[&Molecule]) -> String {
    let mut s: Vec<String> = parts.iter().map(|m| canonical_smiles(m)).collect();
    s.sort();
    s.join(".")
}

fn one_reaction<R: Rng>(rng: &mut R, t: ReactionTemplate) -> Option<(String, String)> {
    let (input, product) = match t {
        ReactionTemplate::HalideToAlcohol => {
            let rx = halide(rng)?;
            let water = rebuild(vec![Atom::new(Element::O)], vec![])?;
            (join(&[&rx, &water]), substitute_halide(&rx)?)
        }
        ReactionTemplate::Esterification => {
            let (alc, ac) = (alcohol(rng)?, acid(rng)?);
            (join(&[&alc, &ac]), esterify(&alc, &ac)?)
        }
        ReactionTemplate::Hydrogenation => {
            let m = alkene(rng)?;
            (join(&[&m]), hydrogenate(&m)?)
        }
    };
    let out = canonical_smiles(&product);
    // the contract: every product reparses as a single valid component
    (rtrl_chem::count_components(&out) == 1).then_some((input, out))
}

/// Labeled reaction records (reactants -> product) with unique inputs,
/// templates drawn uniformly from `templates`.
pub fn gen_toy_reactions(seed: u64, n: usize, templates: &[ReactionTemplate]) -> Result<Dataset> {
    if templates.is_empty() {
        return Err(Error::Generation("no reaction templates".into()));
    }
    let mut rng = stream(seed, &[label::DATA, 2]);
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(n);
    let budget = n * 200 + 1000;
    let mut attempts = 0;
    while records.len() < n {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Generation(format!(
                "only {} unique reactions after {budget} attempts",
                records.len()
            )));
        }
        let t = *templates.choose(&mut rng).expect("non-empty");
        let Some((input, output)) = one_reaction(&mut rng, t) else {
            continue;
        };
        if seen.insert(input.clone()) {
            let mut rec = PairRecord::labeled(input, output);
            rec.meta = Some(BTreeMap::from([(
                "template".to_string(),
                t.name().to_string(),
            )]));
            records.push(rec);
        }
    }
    let mut ds = Dataset::new(
        records,
        Some(DomainKind::Reaction),
        Some(DomainKind::Molecule),
    )?;
    ds.meta.seed = Some(seed);
    ds.meta.generator = Some("reactions".into());
    Ok(ds)
}
