//! Nanoparticle graph datasets from crystallographic information files.

pub mod cif;
pub mod crystal;
pub mod dataset;
pub mod debye;
pub mod elements;
pub mod nanogen;
pub mod pipeline;
