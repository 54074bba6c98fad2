//! Symmetry expansion, lattice transforms, crystal-system classification and
//! the generated structure-type templates.

mod lattice;
mod symmetry;
mod template;
mod write;

pub use lattice::Lattice;
pub use symmetry::{
    expand_symmetry, frac_distance, SpaceGroup, SpacegroupTable, SymOp, DEDUP_TOLERANCE,
};
pub use template::{
    fit_cell_params, fit_line, instantiate_template, CellParam, CrystalTypeTemplate, LinearFit,
    Observation, SiteRole, TemplateSet, TemplateSite,
};
pub use write::write_cif;

use std::fmt;

use thiserror::Error;

use crate::cif::UnitCell;
use crate::elements::ElementError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrystalError {
    #[error("invalid spacegroup number {0}")]
    InvalidSpacegroup(i64),
    #[error("invalid symmetry operator `{0}`")]
    InvalidSymop(String),
    #[error("spacegroup table: {0}")]
    Table(String),
    #[error("{first} and {second} both occupy {frac:?}")]
    SymmetryClash {
        first: String,
        second: String,
        frac: [f64; 3],
    },
    #[error("degenerate fit for {0}: all regressor values coincide")]
    DegenerateFit(String),
    #[error("not enough observations to fit {0}")]
    TooFewObservations(String),
    #[error("template config: {0}")]
    Config(String),
    #[error("{0} is not a metal")]
    NotMetal(String),
    #[error(transparent)]
    Element(#[from] ElementError),
}

/// The seven crystal systems, numbered from lowest to highest symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CrystalSystem {
    Triclinic = 1,
    Monoclinic = 2,
    Orthorhombic = 3,
    Tetragonal = 4,
    Trigonal = 5,
    Hexagonal = 6,
    Cubic = 7,
}

impl CrystalSystem {
    pub const ALL: [CrystalSystem; 7] = [
        CrystalSystem::Triclinic,
        CrystalSystem::Monoclinic,
        CrystalSystem::Orthorhombic,
        CrystalSystem::Tetragonal,
        CrystalSystem::Trigonal,
        CrystalSystem::Hexagonal,
        CrystalSystem::Cubic,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            CrystalSystem::Triclinic => "triclinic",
            CrystalSystem::Monoclinic => "monoclinic",
            CrystalSystem::Orthorhombic => "orthorhombic",
            CrystalSystem::Tetragonal => "tetragonal",
            CrystalSystem::Trigonal => "trigonal",
            CrystalSystem::Hexagonal => "hexagonal",
            CrystalSystem::Cubic => "cubic",
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get((n as usize).checked_sub(1)?).copied()
    }
}

impl fmt::Display for CrystalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn crystal_system_of(spacegroup_number: i64) -> Result<CrystalSystem, CrystalError> {
    Ok(match spacegroup_number {
        1..=2 => CrystalSystem::Triclinic,
        3..=15 => CrystalSystem::Monoclinic,
        16..=74 => CrystalSystem::Orthorhombic,
        75..=142 => CrystalSystem::Tetragonal,
        143..=167 => CrystalSystem::Trigonal,
        168..=194 => CrystalSystem::Hexagonal,
        195..=230 => CrystalSystem::Cubic,
        n => return Err(CrystalError::InvalidSpacegroup(n)),
    })
}

/// Absolute position (Å) of a fractional coordinate in `cell`.
pub fn frac_to_abs(cell: &UnitCell, frac: [f64; 3]) -> [f64; 3] {
    cell.lattice().to_abs(frac)
}
