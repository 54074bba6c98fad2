use std::fmt;
use std::sync::OnceLock;

use super::CrystalError;
use crate::cif::{Site, UnitCell};

const BUILTIN_SPACEGROUPS: &str = include_str!("../../data/spacegroups.txt");

/// Fractional distance below which two symmetry images are the same site.
pub const DEDUP_TOLERANCE: f64 = 1e-3;

/// A symmetry operation `x' = R·x + t` in fractional coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymOp {
    pub rot: [[i32; 3]; 3],
    pub trans: [f64; 3],
}

impl SymOp {
    pub const IDENTITY: SymOp = SymOp {
        rot: [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        trans: [0.0; 3],
    };

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        let mut out = self.trans;
        for (i, o) in out.iter_mut().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                *o += self.rot[i][j] as f64 * xj;
            }
        }
        out
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SymOp) -> SymOp {
        let mut rot = [[0; 3]; 3];
        for (i, row) in rot.iter_mut().enumerate() {
            for (j, r) in row.iter_mut().enumerate() {
                *r = (0..3).map(|k| self.rot[i][k] * other.rot[k][j]).sum();
            }
        }
        SymOp {
            rot,
            trans: self.apply(other.trans),
        }
    }

    /// Equality up to a lattice translation.
    pub fn equivalent(&self, other: &SymOp) -> bool {
        self.rot == other.rot
            && self
                .trans
                .iter()
                .zip(&other.trans)
                .all(|(a, b)| ((a - b) - (a - b).round()).abs() < 1e-6)
    }

    /// Parses a coordinate triplet such as `-y+1/2, x-y, z+1/4`.
    pub fn parse_xyz(s: &str) -> Result<SymOp, CrystalError> {
        let bad = || CrystalError::InvalidSymop(s.to_string());
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut op = SymOp {
            rot: [[0; 3]; 3],
            trans: [0.0; 3],
        };
        for (i, part) in parts.iter().enumerate() {
            let expr: String = part.chars().filter(|c| !c.is_whitespace()).collect();
            if expr.is_empty() {
                return Err(bad());
            }
            let mut terms = Vec::new();
            let mut cur = String::new();
            for ch in expr.chars() {
                if (ch == '+' || ch == '-') && !cur.is_empty() && !cur.ends_with(['e', 'E']) {
                    terms.push(std::mem::take(&mut cur));
                }
                cur.push(ch);
            }
            terms.push(cur);
            for term in terms {
                let (sign, body) = match term.as_bytes()[0] {
                    b'-' => (-1.0, &term[1..]),
                    b'+' => (1.0, &term[1..]),
                    _ => (1.0, term.as_str()),
                };
                let lower = body.to_ascii_lowercase();
                if let Some(pos) = lower.find(['x', 'y', 'z']) {
                    let axis = (lower.as_bytes()[pos] - b'x') as usize;
                    let coef_txt = lower[..pos].trim_end_matches('*');
                    if pos + 1 != lower.len() {
                        return Err(bad());
                    }
                    let coef = if coef_txt.is_empty() {
                        1.0
                    } else {
                        parse_number(coef_txt).ok_or_else(bad)?
                    };
                    let c = sign * coef;
                    if c.fract() != 0.0 {
                        return Err(bad());
                    }
                    op.rot[i][axis] += c as i32;
                } else {
                    op.trans[i] += sign * parse_number(&lower).ok_or_else(bad)?;
                }
            }
        }
        Ok(op)
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((n, d)) => {
            let d: f64 = d.parse().ok()?;
            (d != 0.0).then_some(n.parse::<f64>().ok()? / d)
        }
        None => s.parse().ok(),
    }
}

fn fmt_fraction(t: f64) -> Option<String> {
    let t = t - t.floor();
    if t.abs() < 1e-9 || (1.0 - t).abs() < 1e-9 {
        return None;
    }
    for d in [2, 3, 4, 6, 8, 12] {
        let n = t * d as f64;
        if (n - n.round()).abs() < 1e-9 {
            let n = n.round() as i64;
            let g = gcd(n, d);
            return Some(format!("{}/{}", n / g, d / g));
        }
    }
    Some(format!("{t:.6}"))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for SymOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axes = ['x', 'y', 'z'];
        for i in 0..3 {
            if i > 0 {
                f.write_str(",")?;
            }
            let mut term = String::new();
            for (j, axis) in axes.iter().enumerate() {
                let c = self.rot[i][j];
                if c == 0 {
                    continue;
                }
                if c < 0 {
                    term.push('-');
                } else if !term.is_empty() {
                    term.push('+');
                }
                if c.abs() != 1 {
                    term.push_str(&c.abs().to_string());
                }
                term.push(*axis);
            }
            if let Some(t) = fmt_fraction(self.trans[i]) {
                term.push('+');
                term.push_str(&t);
            }
            if term.is_empty() {
                term.push('0');
            }
            f.write_str(&term)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SpaceGroup {
    pub number: u16,
    pub symbol: String,
    pub ops: Vec<SymOp>,
}

/// Operators for all 230 groups, parsed from `data/spacegroups.txt`.
#[derive(Debug, Clone)]
pub struct SpacegroupTable {
    groups: Vec<SpaceGroup>,
}

/// Old-style symbols that name the same groups as the table's.
const SYMBOL_ALIASES: &[(&str, u16)] = &[
    ("Cmca", 64),
    ("Cmma", 67),
    ("Ccca", 68),
    ("Abm2", 39),
    ("Aba2", 41),
    ("Fm3m", 225),
    ("Pm3m", 221),
    ("Fd3m", 227),
    ("Im3m", 229),
    ("Pn3m", 224),
    ("F43m", 216),
];

fn normalize_symbol(s: &str) -> String {
    let s = s.split(':').next().unwrap_or("").trim();
    let mut tokens: Vec<&str> = s.split_whitespace().collect();
    if tokens.len() == 4 {
        let head = tokens[0];
        let mut rest: Vec<&str> = tokens[1..].iter().copied().filter(|t| *t != "1").collect();
        if rest.is_empty() {
            rest.push("1");
        }
        tokens = std::iter::once(head).chain(rest).collect();
    }
    tokens.concat().replace('_', "")
}

impl SpacegroupTable {
    pub fn builtin() -> &'static SpacegroupTable {
        static TABLE: OnceLock<SpacegroupTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let t = SpacegroupTable::parse(BUILTIN_SPACEGROUPS).expect("builtin spacegroup table");
            for n in [1, 2, 14, 62, 136, 164, 167, 186, 194, 216, 221, 224, 225, 227] {
                assert!(t.is_closed(n), "spacegroup {n} is not closed under composition");
            }
            t
        })
    }

    pub fn parse(text: &str) -> Result<Self, CrystalError> {
        let mut groups: Vec<SpaceGroup> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("group ") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                let number = f
                    .first()
                    .and_then(|n| n.parse::<u16>().ok())
                    .ok_or_else(|| CrystalError::Table(format!("line {}: bad group header", idx + 1)))?;
                if number as usize != groups.len() + 1 {
                    return Err(CrystalError::Table(format!(
                        "line {}: groups must be listed in order 1..230",
                        idx + 1
                    )));
                }
                groups.push(SpaceGroup {
                    number,
                    symbol: f.get(1).copied().unwrap_or("").to_string(),
                    ops: Vec::new(),
                });
            } else {
                let g = groups
                    .last_mut()
                    .ok_or_else(|| CrystalError::Table(format!("line {}: operator before group", idx + 1)))?;
                g.ops.push(SymOp::parse_xyz(line)?);
            }
        }
        if groups.len() != 230 {
            return Err(CrystalError::Table(format!("expected 230 groups, found {}", groups.len())));
        }
        Ok(Self { groups })
    }

    pub fn get(&self, number: u16) -> Option<&SpaceGroup> {
        number
            .checked_sub(1)
            .and_then(|i| self.groups.get(i as usize))
    }

    pub fn symbol(&self, number: u16) -> Option<&str> {
        self.get(number).map(|g| g.symbol.as_str())
    }

    pub fn ops(&self, number: u16) -> Option<&[SymOp]> {
        self.get(number).map(|g| g.ops.as_slice())
    }

    /// Resolves a Hermann-Mauguin symbol in any common spelling
    /// (`F m -3 m`, `P 1 21/c 1`, `P 63/m m c`, `R -3 c :H`).
    pub fn number_for_symbol(&self, symbol: &str) -> Option<u16> {
        let norm = normalize_symbol(symbol);
        if norm.is_empty() {
            return None;
        }
        if let Some(g) = self.groups.iter().find(|g| g.symbol == norm) {
            return Some(g.number);
        }
        let lower = norm.to_ascii_lowercase();
        if let Some(g) = self.groups.iter().find(|g| g.symbol.to_ascii_lowercase() == lower) {
            return Some(g.number);
        }
        SYMBOL_ALIASES
            .iter()
            .find(|(alias, _)| alias.to_ascii_lowercase() == lower)
            .map(|&(_, n)| n)
    }

    /// Checks closure of a group under composition modulo lattice translations.
    pub fn is_closed(&self, number: u16) -> bool {
        let Some(ops) = self.ops(number) else {
            return false;
        };
        ops.iter().all(|a| {
            ops.iter().all(|b| {
                let ab = a.compose(b);
                ops.iter().any(|c| c.equivalent(&ab))
            })
        })
    }
}

pub(crate) fn wrap_frac(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 - 1e-12 {
        0.0
    } else {
        w
    }
}

/// Minimum-image distance between two fractional positions, in fractional units.
pub fn frac_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(x, y)| {
            let d = x - y;
            let d = d - d.round();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Applies every symmetry operation to every site and deduplicates images.
///
/// Operators listed in the cell itself take precedence over the table.
/// Coincident images of different species are resolved in favour of the
/// higher occupancy; two fully occupied species on one position clash.
pub fn expand_symmetry(cell: &UnitCell, table: &SpacegroupTable) -> Result<UnitCell, CrystalError> {
    let ops: &[SymOp] = if cell.symops.is_empty() {
        table
            .ops(cell.spacegroup_number)
            .ok_or(CrystalError::InvalidSpacegroup(cell.spacegroup_number as i64))?
    } else {
        &cell.symops
    };
    let mut out: Vec<Site> = Vec::new();
    for site in &cell.sites {
        for op in ops {
            let p = op.apply(site.frac).map(wrap_frac);
            match out
                .iter()
                .position(|s| frac_distance(s.frac, p) < DEDUP_TOLERANCE)
            {
                None => out.push(Site {
                    frac: p,
                    ..site.clone()
                }),
                Some(k) => {
                    let existing = &out[k];
                    if existing.element == site.element {
                        continue;
                    }
                    let partial = existing.occupancy < 1.0 || site.occupancy < 1.0;
                    if !partial {
                        return Err(CrystalError::SymmetryClash {
                            first: existing.element.clone(),
                            second: site.element.clone(),
                            frac: p,
                        });
                    }
                    if site.occupancy > existing.occupancy {
                        out[k] = Site {
                            frac: out[k].frac,
                            ..site.clone()
                        };
                    }
                }
            }
        }
    }
    Ok(UnitCell {
        sites: out,
        ..cell.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_operator_spellings() {
        let op = SymOp::parse_xyz("-y+1/2, x-y, z+1/4").unwrap();
        assert_eq!(op.rot, [[0, -1, 0], [1, -1, 0], [0, 0, 1]]);
        assert_eq!(op.trans, [0.5, 0.0, 0.25]);
        let op = SymOp::parse_xyz("1/2+X,0.5-Y,-z").unwrap();
        assert_eq!(op.rot, [[1, 0, 0], [0, -1, 0], [0, 0, -1]]);
        assert_eq!(op.trans, [0.5, 0.5, 0.0]);
        assert!(SymOp::parse_xyz("x,y").is_err());
        assert!(SymOp::parse_xyz("x,y,w").is_err());
        assert!(SymOp::parse_xyz("x,y,1/0").is_err());
    }

    #[test]
    fn display_round_trips() {
        let t = SpacegroupTable::builtin();
        for n in 1..=230 {
            for op in t.ops(n).unwrap() {
                let again = SymOp::parse_xyz(&op.to_string()).unwrap();
                assert!(again.equivalent(op), "{n}: {op}");
            }
        }
    }

    #[test]
    fn table_shape() {
        let t = SpacegroupTable::builtin();
        assert_eq!(t.ops(1).unwrap().len(), 1);
        assert_eq!(t.ops(225).unwrap().len(), 192);
        assert_eq!(t.symbol(225), Some("Fm-3m"));
        assert_eq!(t.symbol(194), Some("P63/mmc"));
        assert!(t.get(0).is_none());
        assert!(t.get(231).is_none());
    }

    #[test]
    fn every_group_is_closed() {
        let t = SpacegroupTable::builtin();
        for n in 1..=230 {
            assert!(t.is_closed(n), "group {n}");
        }
    }

    #[test]
    fn symbol_spellings() {
        let t = SpacegroupTable::builtin();
        assert_eq!(t.number_for_symbol("F m -3 m"), Some(225));
        assert_eq!(t.number_for_symbol("P 1 21/c 1"), Some(14));
        assert_eq!(t.number_for_symbol("P 63/m m c"), Some(194));
        assert_eq!(t.number_for_symbol("R -3 c :H"), Some(167));
        assert_eq!(t.number_for_symbol("P -1"), Some(2));
        assert_eq!(t.number_for_symbol("P 1"), Some(1));
        assert_eq!(t.number_for_symbol("C m c a"), Some(64));
        assert_eq!(t.number_for_symbol("Q 42"), None);
    }
}
