//! CIF 1.1 reading, repair and unit-cell extraction.
//!
//! [`parse`] tokenizes a file into a [`CifDocument`] without interpreting the
//! chemistry. [`clean`] applies the repair rules in a fixed order and logs
//! every change. [`extract_unit_cell`] turns a cleaned document into a
//! [`UnitCell`].

mod clean;
mod extract;
mod parse;
mod write;

pub use clean::{clean, clean_bytes, CleanReport, Fix, RejectionReason, RuleId};
pub use extract::{cell_volume, extract_unit_cell, parse_numeric, UnitCell, Site};
pub use parse::parse;
pub use write::write_document;

use thiserror::Error;

use crate::elements::ElementError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CifError {
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("missing section: {0}")]
    MissingSection(String),
    #[error("invalid spacegroup: {0}")]
    InvalidSpacegroup(String),
    #[error("invalid value for {tag}: `{value}`")]
    InvalidValue { tag: String, value: String },
    #[error(transparent)]
    Element(#[from] ElementError),
}

/// A parsed CIF file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CifDocument {
    pub source_id: String,
    pub blocks: Vec<DataBlock>,
}

/// One `data_` block: tagged items and loops in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataBlock {
    pub name: String,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Pair { tag: String, value: String },
    Loop(LoopTable),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoopTable {
    pub tags: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl LoopTable {
    pub fn column(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t.eq_ignore_ascii_case(tag))
    }

    pub fn has_any(&self, tags: &[&str]) -> bool {
        tags.iter().any(|t| self.column(t).is_some())
    }
}

impl DataBlock {
    /// Value of a non-looped tag (case-insensitive tag match).
    pub fn get(&self, tag: &str) -> Option<&str> {
        self.items.iter().find_map(|it| match it {
            Item::Pair { tag: t, value } if t.eq_ignore_ascii_case(tag) => Some(value.as_str()),
            _ => None,
        })
    }

    /// First of `tags` present as a pair, or as a single-row loop column.
    pub fn get_any(&self, tags: &[&str]) -> Option<&str> {
        tags.iter().find_map(|t| self.get(t)).or_else(|| {
            tags.iter().find_map(|t| {
                let lp = self.find_loop(&[t])?;
                let col = lp.column(t)?;
                match lp.rows.as_slice() {
                    [row] => row.get(col).map(String::as_str),
                    _ => None,
                }
            })
        })
    }

    pub fn find_loop(&self, tags: &[&str]) -> Option<&LoopTable> {
        self.loops().find(|lp| lp.has_any(tags))
    }

    pub fn loops(&self) -> impl Iterator<Item = &LoopTable> {
        self.items.iter().filter_map(|it| match it {
            Item::Loop(lp) => Some(lp),
            _ => None,
        })
    }
}

/// Tag groups consulted during cleaning and extraction.
pub(crate) mod tags {
    pub const CELL: [&str; 6] = [
        "_cell_length_a",
        "_cell_length_b",
        "_cell_length_c",
        "_cell_angle_alpha",
        "_cell_angle_beta",
        "_cell_angle_gamma",
    ];
    pub const SG_NUMBER: [&str; 2] = ["_space_group_IT_number", "_symmetry_Int_Tables_number"];
    pub const SG_SYMBOL: [&str; 2] = [
        "_space_group_name_H-M_alt",
        "_symmetry_space_group_name_H-M",
    ];
    pub const SYMOPS: [&str; 2] = [
        "_space_group_symop_operation_xyz",
        "_symmetry_equiv_pos_as_xyz",
    ];
    pub const LABEL: &str = "_atom_site_label";
    pub const TYPE_SYMBOL: &str = "_atom_site_type_symbol";
    pub const FRACT: [&str; 3] = [
        "_atom_site_fract_x",
        "_atom_site_fract_y",
        "_atom_site_fract_z",
    ];
    pub const OCCUPANCY: &str = "_atom_site_occupancy";
    pub const CRYSTAL_TYPE: &str = "_chiliforge_crystal_type";
}

pub(crate) fn is_missing(v: &str) -> bool {
    matches!(v, "?" | ".") || v.is_empty()
}
