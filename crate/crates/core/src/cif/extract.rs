use super::{is_missing, tags, CifDocument, CifError, DataBlock};
use crate::crystal::{Lattice, SpacegroupTable, SymOp};
use crate::elements::ElementTable;

/// One atomic site in fractional coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub label: String,
    pub element: String,
    pub frac: [f64; 3],
    pub occupancy: f64,
}

/// Cell parameters, spacegroup and sites of a crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitCell {
    /// Provenance: the CIF block name or a generated id.
    pub name: String,
    /// Structure-type name for generated cells; `None` for database entries.
    pub crystal_type: Option<String>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub spacegroup_number: u16,
    pub spacegroup_symbol: String,
    pub sites: Vec<Site>,
    /// Operators listed in the source file; empty means "use the table".
    pub symops: Vec<SymOp>,
}

impl UnitCell {
    pub fn params(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.alpha, self.beta, self.gamma]
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::from_params(self.params())
    }

    /// Distinct element symbols in site order of first appearance.
    pub fn elements(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.sites {
            if !out.contains(&s.element.as_str()) {
                out.push(&s.element);
            }
        }
        out
    }
}

/// Unit-cell volume in Å³.
pub fn cell_volume(cell: &UnitCell) -> f64 {
    let [a, b, c, al, be, ga] = cell.params();
    let (ca, cb, cg) = (
        al.to_radians().cos(),
        be.to_radians().cos(),
        ga.to_radians().cos(),
    );
    a * b * c * (1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg).max(0.0).sqrt()
}

/// Parses a CIF numeral, dropping a trailing `(uncertainty)`.
/// Returns `None` for `?`, `.` and anything non-numeric.
pub fn parse_numeric(v: &str) -> Option<f64> {
    if is_missing(v) {
        return None;
    }
    let core = match v.find('(') {
        Some(p) => &v[..p],
        None => v,
    };
    core.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Element symbol named by a type symbol or site label, the way CIF readers
/// interpret it: a capital letter optionally followed by a lower-case letter.
pub(crate) fn interpret_symbol(raw: &str, table: &ElementTable) -> Option<String> {
    let letters: Vec<char> = raw.chars().take_while(char::is_ascii_alphabetic).collect();
    let first = *letters.first()?;
    if !first.is_ascii_uppercase() {
        return None;
    }
    if let Some(&second) = letters.get(1) {
        if second.is_ascii_lowercase() {
            let two: String = [first, second].iter().collect();
            if table.contains_symbol(&two) {
                return Some(two);
            }
        }
    }
    let one = first.to_string();
    table.contains_symbol(&one).then_some(one)
}

fn required(block: &DataBlock, tag: &str) -> Result<f64, CifError> {
    let raw = block
        .get_any(&[tag])
        .ok_or_else(|| CifError::MissingSection(tag.to_string()))?;
    if is_missing(raw) {
        return Err(CifError::MissingSection(tag.to_string()));
    }
    parse_numeric(raw).ok_or_else(|| CifError::InvalidValue {
        tag: tag.to_string(),
        value: raw.to_string(),
    })
}

fn wrap(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

fn resolve_spacegroup(block: &DataBlock, table: &SpacegroupTable) -> Result<(u16, String), CifError> {
    let number = block
        .get_any(&tags::SG_NUMBER)
        .filter(|v| !is_missing(v))
        .map(|v| {
            v.trim().parse::<u16>().map_err(|_| {
                CifError::InvalidSpacegroup(format!("spacegroup number `{v}` is not an integer"))
            })
        })
        .transpose()?;
    let symbol = block.get_any(&tags::SG_SYMBOL).filter(|v| !is_missing(v));
    match (number, symbol) {
        (Some(n), _) => {
            let sym = table
                .symbol(n)
                .ok_or_else(|| CifError::InvalidSpacegroup(format!("number {n} outside 1-230")))?;
            Ok((n, sym.to_string()))
        }
        (None, Some(s)) => {
            let n = table
                .number_for_symbol(s)
                .ok_or_else(|| CifError::InvalidSpacegroup(format!("unrecognised symbol `{s}`")))?;
            Ok((n, table.symbol(n).unwrap_or(s).to_string()))
        }
        (None, None) => Err(CifError::InvalidSpacegroup(
            "neither spacegroup number nor symbol given".into(),
        )),
    }
}

fn explicit_symops(block: &DataBlock) -> Result<Vec<SymOp>, CifError> {
    let Some(lp) = block.find_loop(&tags::SYMOPS) else {
        return Ok(Vec::new());
    };
    let col = tags::SYMOPS
        .iter()
        .find_map(|t| lp.column(t))
        .expect("loop located by tag");
    lp.rows
        .iter()
        .map(|row| {
            let raw = row.get(col).map(String::as_str).unwrap_or("");
            SymOp::parse_xyz(raw).map_err(|_| CifError::InvalidValue {
                tag: lp.tags[col].clone(),
                value: raw.to_string(),
            })
        })
        .collect()
}

/// Builds a [`UnitCell`] from the first block that carries atom sites.
pub fn extract_unit_cell(doc: &CifDocument) -> Result<UnitCell, CifError> {
    let block = doc
        .blocks
        .iter()
        .find(|b| b.find_loop(&tags::FRACT).is_some())
        .or_else(|| doc.blocks.first())
        .ok_or_else(|| CifError::MissingSection("data_ block".into()))?;
    let elements = ElementTable::builtin();
    let sg_table = SpacegroupTable::builtin();

    let mut params = [0.0; 6];
    for (slot, tag) in params.iter_mut().zip(tags::CELL) {
        *slot = required(block, tag)?;
    }
    for (k, &v) in params.iter().enumerate() {
        let ok = if k < 3 { v > 0.0 } else { v > 0.0 && v < 180.0 };
        if !ok {
            return Err(CifError::InvalidValue {
                tag: tags::CELL[k].to_string(),
                value: v.to_string(),
            });
        }
    }

    let (spacegroup_number, spacegroup_symbol) = resolve_spacegroup(block, sg_table)?;
    let symops = explicit_symops(block)?;

    let lp = block
        .find_loop(&tags::FRACT)
        .ok_or_else(|| CifError::MissingSection("_atom_site_fract_x".into()))?;
    let mut cols = [0usize; 3];
    for (slot, tag) in cols.iter_mut().zip(tags::FRACT) {
        *slot = lp
            .column(tag)
            .ok_or_else(|| CifError::MissingSection(tag.to_string()))?;
    }
    let label_col = lp.column(tags::LABEL);
    let type_col = lp.column(tags::TYPE_SYMBOL);
    if label_col.is_none() && type_col.is_none() {
        return Err(CifError::MissingSection(tags::TYPE_SYMBOL.into()));
    }
    let occ_col = lp.column(tags::OCCUPANCY);

    let mut sites = Vec::with_capacity(lp.rows.len());
    for row in &lp.rows {
        let cell = |c: usize| row.get(c).map(String::as_str).unwrap_or("?");
        let label = label_col.map(cell).unwrap_or("").to_string();
        let type_raw = type_col.map(cell).filter(|v| !is_missing(v));
        let raw_symbol = type_raw.unwrap_or(label.as_str());
        let element = interpret_symbol(raw_symbol, elements)
            .ok_or_else(|| crate::elements::ElementError::UnknownElement(raw_symbol.to_string()))?;
        let mut frac = [0.0; 3];
        for k in 0..3 {
            let raw = cell(cols[k]);
            let v = parse_numeric(raw).ok_or_else(|| CifError::InvalidValue {
                tag: tags::FRACT[k].to_string(),
                value: raw.to_string(),
            })?;
            frac[k] = wrap(v);
        }
        let occupancy = match occ_col.map(cell) {
            Some(raw) if !is_missing(raw) => {
                let v = parse_numeric(raw).ok_or_else(|| CifError::InvalidValue {
                    tag: tags::OCCUPANCY.into(),
                    value: raw.to_string(),
                })?;
                if v <= 0.0 {
                    return Err(CifError::InvalidValue {
                        tag: tags::OCCUPANCY.into(),
                        value: raw.to_string(),
                    });
                }
                v.min(1.0)
            }
            _ => 1.0,
        };
        sites.push(Site {
            label,
            element,
            frac,
            occupancy,
        });
    }

    let crystal_type = block
        .get(tags::CRYSTAL_TYPE)
        .filter(|v| !is_missing(v))
        .map(str::to_string);
    let cell = UnitCell {
        name: block.name.clone(),
        crystal_type,
        a: params[0],
        b: params[1],
        c: params[2],
        alpha: params[3],
        beta: params[4],
        gamma: params[5],
        spacegroup_number,
        spacegroup_symbol,
        sites,
        symops,
    };
    if !(cell_volume(&cell) > 0.0) {
        return Err(CifError::InvalidValue {
            tag: "_cell_angle_*".into(),
            value: format!("{:?}", &params[3..]),
        });
    }
    Ok(cell)
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    const ROCKSALT: &str = "data_NaCl
_cell_length_a 5.431(2)
_cell_length_b 5.431
_cell_length_c 5.431
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
_symmetry_space_group_name_H-M 'F m -3 m'
loop_
_atom_site_label
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
Na1 Na+ 0 0 0
Cl1 Cl- 0.5 0.5 1.5
";

    #[test]
    fn extracts_cell_and_sites() {
        let doc = parse(ROCKSALT.as_bytes(), "t").unwrap();
        let cell = extract_unit_cell(&doc).unwrap();
        assert_eq!(cell.a, 5.431);
        assert_eq!(cell.spacegroup_number, 225);
        assert_eq!(cell.spacegroup_symbol, "Fm-3m");
        assert_eq!(cell.sites.len(), 2);
        assert_eq!(cell.sites[0].element, "Na");
        assert_eq!(cell.sites[1].element, "Cl");
        assert_eq!(cell.sites[1].frac, [0.5, 0.5, 0.5]);
        assert_eq!(cell.sites[0].occupancy, 1.0);
    }

    #[test]
    fn missing_cell_length_is_reported() {
        let src = ROCKSALT.replace("_cell_length_a 5.431(2)\n", "");
        let doc = parse(src.as_bytes(), "t").unwrap();
        assert_eq!(
            extract_unit_cell(&doc),
            Err(CifError::MissingSection("_cell_length_a".into()))
        );
    }

    #[test]
    fn unresolvable_spacegroup() {
        let src = ROCKSALT.replace("'F m -3 m'", "'Q 9'");
        let doc = parse(src.as_bytes(), "t").unwrap();
        assert!(matches!(
            extract_unit_cell(&doc),
            Err(CifError::InvalidSpacegroup(_))
        ));
        let src = ROCKSALT.replace(
            "_symmetry_space_group_name_H-M 'F m -3 m'",
            "_space_group_IT_number 231",
        );
        let doc = parse(src.as_bytes(), "t").unwrap();
        assert!(matches!(
            extract_unit_cell(&doc),
            Err(CifError::InvalidSpacegroup(_))
        ));
    }

    #[test]
    fn volume_examples() {
        let doc = parse(ROCKSALT.as_bytes(), "t").unwrap();
        let mut cell = extract_unit_cell(&doc).unwrap();
        (cell.a, cell.b, cell.c) = (10.0, 10.0, 10.0);
        assert!((cell_volume(&cell) - 1000.0).abs() < 1e-9);
        (cell.a, cell.b, cell.c) = (3.0, 4.0, 5.0);
        assert!((cell_volume(&cell) - 60.0).abs() < 1e-9);
        (cell.a, cell.b, cell.c) = (1.0, 1.0, 1.0);
        (cell.alpha, cell.beta, cell.gamma) = (60.0, 60.0, 60.0);
        // 1 - 3/4 + 2/8 = 1/2
        assert!((cell_volume(&cell) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn numerals() {
        assert_eq!(parse_numeric("5.431(2)"), Some(5.431));
        assert_eq!(parse_numeric("-0.25"), Some(-0.25));
        assert_eq!(parse_numeric("?"), None);
        assert_eq!(parse_numeric("abc"), None);
    }

    #[test]
    fn symbol_interpretation() {
        let t = ElementTable::builtin();
        assert_eq!(interpret_symbol("Cu2+", t).as_deref(), Some("Cu"));
        assert_eq!(interpret_symbol("O1", t).as_deref(), Some("O"));
        // All-caps reads as the one-letter element.
        assert_eq!(interpret_symbol("CU1", t).as_deref(), Some("C"));
        assert_eq!(interpret_symbol("Xx", t), None);
        assert_eq!(interpret_symbol("1abc", t), None);
    }
}
