//! Periodic-table constants and dataset element policies.
//!
//! Every per-element number used downstream (radii, weights, scattering
//! amplitudes) is read from `data/elements.tsv`. The table is parsed once and
//! shared immutably.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

const BUILTIN_TABLE: &str = include_str!("../data/elements.tsv");
const POLICY_CHILI3K: &str = include_str!("../data/policy_chili3k.txt");
const POLICY_CHILI100K: &str = include_str!("../data/policy_chili100k.txt");

/// Neighborhood scale applied to the Slater radius when building edges.
pub const INTERACTION_SCALE: f64 = 1.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("element {0} has no tabulated crystal radius")]
    MissingRadius(String),
    #[error("element {0} has no {1} scattering data")]
    MissingScatteringData(String, &'static str),
    #[error("element table line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("policy `{policy}`: {msg}")]
    Policy { policy: String, msg: String },
}

/// Constants for one chemical element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementRecord {
    pub symbol: String,
    pub atomic_number: u32,
    /// Slater crystal radius in Å. Zero when not tabulated.
    pub slater_radius: f64,
    /// Atomic weight in amu.
    pub atomic_weight: f64,
    /// Electron affinity in eV, if known.
    pub electron_affinity: Option<f64>,
    pub is_metal: bool,
    /// Coherent neutron scattering length in fm.
    pub neutron_length: Option<f64>,
    /// Cromer-Mann coefficients `a1 b1 a2 b2 a3 b3 a4 b4 c`.
    pub xray_ff_coeffs: Option<[f64; 9]>,
}

impl ElementRecord {
    /// X-ray form factor at momentum transfer `q` (Å⁻¹).
    pub fn xray_form_factor(&self, q: f64) -> Result<f64, ElementError> {
        let c = self
            .xray_ff_coeffs
            .ok_or_else(|| ElementError::MissingScatteringData(self.symbol.clone(), "x-ray"))?;
        Ok(cromer_mann(&c, q))
    }

    pub fn neutron_amplitude(&self) -> Result<f64, ElementError> {
        self.neutron_length
            .ok_or_else(|| ElementError::MissingScatteringData(self.symbol.clone(), "neutron"))
    }

    /// Electron affinity as a node feature; unknown values map to 0.
    pub fn electron_affinity_or_zero(&self) -> f64 {
        self.electron_affinity.unwrap_or(0.0)
    }
}

/// `f(Q) = Σ aᵢ exp(−bᵢ (Q/4π)²) + c`.
pub fn cromer_mann(c: &[f64; 9], q: f64) -> f64 {
    let s = q / (4.0 * std::f64::consts::PI);
    let s2 = s * s;
    let mut f = c[8];
    for k in 0..4 {
        f += c[2 * k] * (-c[2 * k + 1] * s2).exp();
    }
    f
}

/// Lookup key: a symbol or an atomic number.
#[derive(Debug, Clone, Copy)]
pub enum ElementKey<'a> {
    Symbol(&'a str),
    Number(u32),
}

impl<'a> From<&'a str> for ElementKey<'a> {
    fn from(s: &'a str) -> Self {
        ElementKey::Symbol(s)
    }
}

impl<'a> From<&'a String> for ElementKey<'a> {
    fn from(s: &'a String) -> Self {
        ElementKey::Symbol(s.as_str())
    }
}

impl From<u32> for ElementKey<'_> {
    fn from(z: u32) -> Self {
        ElementKey::Number(z)
    }
}

impl fmt::Display for ElementKey<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementKey::Symbol(s) => write!(f, "{s}"),
            ElementKey::Number(z) => write!(f, "Z={z}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ElementTable {
    records: Vec<ElementRecord>,
    by_symbol: HashMap<String, usize>,
    by_number: HashMap<u32, usize>,
}

impl ElementTable {
    /// The table shipped in `data/elements.tsv`.
    pub fn builtin() -> &'static ElementTable {
        static TABLE: OnceLock<ElementTable> = OnceLock::new();
        TABLE.get_or_init(|| ElementTable::parse(BUILTIN_TABLE).expect("builtin element table"))
    }

    pub fn parse(text: &str) -> Result<Self, ElementError> {
        let mut records = Vec::new();
        let mut by_symbol = HashMap::new();
        let mut by_number = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let cols: Vec<&str> = content.split('\t').map(str::trim).collect();
            if cols.len() != 16 {
                return Err(ElementError::Table {
                    line,
                    msg: format!("expected 16 columns, found {}", cols.len()),
                });
            }
            let num = |s: &str| -> Result<Option<f64>, ElementError> {
                if s == "-" {
                    return Ok(None);
                }
                s.parse::<f64>().map(Some).map_err(|_| ElementError::Table {
                    line,
                    msg: format!("bad number `{s}`"),
                })
            };
            let atomic_number: u32 = cols[1].parse().map_err(|_| ElementError::Table {
                line,
                msg: format!("bad atomic number `{}`", cols[1]),
            })?;
            let mut ff = [0.0; 9];
            let mut have_ff = true;
            for (k, slot) in ff.iter_mut().enumerate() {
                match num(cols[7 + k])? {
                    Some(v) => *slot = v,
                    None => have_ff = false,
                }
            }
            let rec = ElementRecord {
                symbol: cols[0].to_string(),
                atomic_number,
                slater_radius: num(cols[2])?.unwrap_or(0.0),
                atomic_weight: num(cols[3])?.unwrap_or(0.0),
                electron_affinity: num(cols[4])?,
                is_metal: cols[5] == "1",
                neutron_length: num(cols[6])?,
                xray_ff_coeffs: have_ff.then_some(ff),
            };
            if by_symbol.contains_key(&rec.symbol) || by_number.contains_key(&atomic_number) {
                return Err(ElementError::Table {
                    line,
                    msg: format!("duplicate element {}", rec.symbol),
                });
            }
            by_symbol.insert(rec.symbol.clone(), records.len());
            by_number.insert(atomic_number, records.len());
            records.push(rec);
        }
        Ok(Self {
            records,
            by_symbol,
            by_number,
        })
    }

    pub fn lookup<'k>(&self, key: impl Into<ElementKey<'k>>) -> Result<&ElementRecord, ElementError> {
        let key = key.into();
        let idx = match key {
            ElementKey::Symbol(s) => self.by_symbol.get(s),
            ElementKey::Number(z) => self.by_number.get(&z),
        };
        idx.map(|&i| &self.records[i])
            .ok_or_else(|| ElementError::UnknownElement(key.to_string()))
    }

    pub fn contains_symbol(&self, symbol: &str) -> bool {
        self.by_symbol.contains_key(symbol)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ElementRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Radius of the sphere whose overlaps define graph edges.
pub fn interaction_radius(e: &ElementRecord) -> Result<f64, ElementError> {
    if e.slater_radius > 0.0 {
        Ok(INTERACTION_SCALE * e.slater_radius)
    } else {
        Err(ElementError::MissingRadius(e.symbol.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    Chili3k,
    Chili100k,
    Custom,
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyName::Chili3k => "chili3k",
            PolicyName::Chili100k => "chili100k",
            PolicyName::Custom => "custom",
        })
    }
}

/// Which elements a dataset may contain.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementPolicy {
    pub name: PolicyName,
    pub allowed_metals: BTreeSet<String>,
    pub allowed_nonmetals: BTreeSet<String>,
}

impl ElementPolicy {
    pub fn chili3k() -> Self {
        Self::parse(PolicyName::Chili3k, POLICY_CHILI3K, ElementTable::builtin())
            .expect("builtin chili3k policy")
    }

    pub fn chili100k() -> Self {
        Self::parse(PolicyName::Chili100k, POLICY_CHILI100K, ElementTable::builtin())
            .expect("builtin chili100k policy")
    }

    /// Parses a policy file: one symbol per line, `#` starts a comment.
    /// The metal/non-metal split follows the element table's metal flag.
    pub fn parse(name: PolicyName, text: &str, table: &ElementTable) -> Result<Self, ElementError> {
        let mut allowed_metals = BTreeSet::new();
        let mut allowed_nonmetals = BTreeSet::new();
        for raw in text.lines() {
            let sym = raw.split('#').next().unwrap_or("").trim();
            if sym.is_empty() {
                continue;
            }
            let rec = table.lookup(sym).map_err(|e| ElementError::Policy {
                policy: name.to_string(),
                msg: e.to_string(),
            })?;
            if rec.is_metal {
                allowed_metals.insert(rec.symbol.clone());
            } else {
                allowed_nonmetals.insert(rec.symbol.clone());
            }
        }
        Ok(Self {
            name,
            allowed_metals,
            allowed_nonmetals,
        })
    }

    /// Resolves `chili3k` / `chili100k` or reads a custom policy file.
    pub fn from_name_or_path(spec: &str) -> Result<Self, ElementError> {
        match spec {
            "chili3k" => Ok(Self::chili3k()),
            "chili100k" => Ok(Self::chili100k()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| ElementError::Policy {
                    policy: path.to_string(),
                    msg: e.to_string(),
                })?;
                Self::parse(PolicyName::Custom, &text, ElementTable::builtin())
            }
        }
    }

    pub fn is_allowed(&self, symbol: &str) -> bool {
        self.allowed_metals.contains(symbol) || self.allowed_nonmetals.contains(symbol)
    }
}

pub fn is_allowed(symbol: &str, policy: &ElementPolicy) -> bool {
    policy.is_allowed(symbol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> &'static ElementTable {
        ElementTable::builtin()
    }

    #[test]
    fn lookup_by_symbol_and_number() {
        assert_eq!(table().lookup("O").unwrap().atomic_number, 8);
        assert_eq!(table().lookup(29).unwrap().symbol, "Cu");
        assert_eq!(table().lookup("Cu").unwrap().slater_radius, 1.35);
        assert!(matches!(
            table().lookup(119),
            Err(ElementError::UnknownElement(_))
        ));
        assert!(table().lookup("cu").is_err());
    }

    #[test]
    fn interaction_radius_scales_slater() {
        let mut e = table().lookup("O").unwrap().clone();
        assert!((interaction_radius(&e).unwrap() - 0.75).abs() < 1e-12);
        e.slater_radius = 1.0;
        assert!((interaction_radius(&e).unwrap() - 1.25).abs() < 1e-12);
        e.slater_radius = 0.0;
        assert!(matches!(
            interaction_radius(&e),
            Err(ElementError::MissingRadius(_))
        ));
    }

    #[test]
    fn policy_cardinalities() {
        let p3 = ElementPolicy::chili3k();
        assert_eq!(p3.allowed_metals.len(), 53);
        assert_eq!(p3.allowed_nonmetals.len(), 1);
        assert!(p3.allowed_nonmetals.contains("O"));
        let p100 = ElementPolicy::chili100k();
        assert_eq!(p100.allowed_metals.len(), 67);
        assert_eq!(p100.allowed_nonmetals.len(), 11);
        for p in [&p3, &p100] {
            assert!(p.allowed_metals.is_disjoint(&p.allowed_nonmetals));
        }
    }

    #[test]
    fn is_allowed_examples() {
        assert!(is_allowed("O", &ElementPolicy::chili3k()));
        assert!(!is_allowed("He", &ElementPolicy::chili100k()));
        assert!(is_allowed("Cu", &ElementPolicy::chili3k()));
        assert!(!is_allowed("Xx", &ElementPolicy::chili3k()));
    }

    #[test]
    fn policy_elements_have_complete_data() {
        for p in [ElementPolicy::chili3k(), ElementPolicy::chili100k()] {
            for sym in p.allowed_metals.iter().chain(&p.allowed_nonmetals) {
                let e = table().lookup(sym.as_str()).unwrap();
                assert!(interaction_radius(e).unwrap() > 0.0, "{sym}");
                assert!(e.xray_ff_coeffs.is_some(), "{sym}");
                assert!(e.neutron_length.is_some(), "{sym}");
            }
        }
    }

    #[test]
    fn form_factor_at_zero_matches_atomic_number() {
        for e in table().iter().filter(|e| e.xray_ff_coeffs.is_some()) {
            let f0 = e.xray_form_factor(0.0).unwrap();
            let z = e.atomic_number as f64;
            assert!((f0 - z).abs() / z < 0.01, "{}: f(0)={f0}", e.symbol);
        }
    }

    #[test]
    fn form_factor_decays_monotonically() {
        for e in table().iter().filter(|e| e.xray_ff_coeffs.is_some()) {
            let mut prev = e.xray_form_factor(0.0).unwrap();
            for k in 1..=600 {
                let f = e.xray_form_factor(k as f64 * 0.05).unwrap();
                assert!(f <= prev + 1e-12, "{} rises at Q={}", e.symbol, k as f64 * 0.05);
                prev = f;
            }
        }
    }

    #[test]
    fn table_rejects_duplicates() {
        let row = "O\t8\t0.60\t15.999\t1.46\t0\t5.8\t1\t1\t1\t1\t1\t1\t1\t1\t4\n";
        let err = ElementTable::parse(&format!("{row}{row}")).unwrap_err();
        assert!(matches!(err, ElementError::Table { line: 2, .. }));
    }
}
