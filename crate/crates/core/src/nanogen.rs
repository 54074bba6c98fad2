//! Supercell tiling, centering, neighbourhood edges, spherical cutout and
//! graph assembly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cif::UnitCell;
use crate::crystal::{crystal_system_of, CrystalError, Lattice};
use crate::debye::{dist, ScatteringSet};
use crate::elements::{interaction_radius, ElementError, ElementRecord, ElementTable};

/// Default cap on replications per lattice direction.
pub const DEFAULT_REPLICATION_CAP: usize = 64;
/// Padding added to the particle diameter when tiling (Å).
pub const SUPERCELL_PADDING: f64 = 5.0;
/// Fallback radius as a fraction of the smallest unit-cell distance.
pub const FALLBACK_RADIUS_FACTOR: f64 = 0.55;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NanogenError {
    #[error("cell needs {needed} replications along axis {axis}, cap is {cap}")]
    CellTooLarge { axis: usize, needed: usize, cap: usize },
    #[error("no metal atom in the cloud")]
    NoMetalAtom,
    #[error("no atom within {0} Å of the origin")]
    EmptyParticle(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Crystal(#[from] CrystalError),
}

/// Positioned atoms with per-atom interaction radii.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomCloud {
    pub source: String,
    pub positions: Vec<[f64; 3]>,
    /// Index into `species` per atom.
    pub kinds: Vec<usize>,
    /// Distinct elements, ascending atomic number.
    pub species: Vec<ElementRecord>,
    pub interaction_radii: Vec<f64>,
    pub origin_distances: Vec<f64>,
    /// Geometric centre of the tiled block (Å).
    pub center: [f64; 3],
    /// Smallest interatomic distance of the parent unit cell, periodic images included.
    pub unit_cell_dmin: f64,
}

impl AtomCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn element(&self, i: usize) -> &ElementRecord {
        &self.species[self.kinds[i]]
    }

    pub fn is_metal(&self, i: usize) -> bool {
        self.element(i).is_metal
    }

    /// The expanded unit cell itself, without periodic images.
    pub fn from_cell(cell: &UnitCell, table: &ElementTable) -> Result<Self, NanogenError> {
        let lattice = cell.lattice();
        let mut species: Vec<ElementRecord> = Vec::new();
        for s in &cell.sites {
            if !species.iter().any(|e| e.symbol == s.element) {
                species.push(table.lookup(s.element.as_str())?.clone());
            }
        }
        species.sort_by_key(|e| e.atomic_number);
        let radii: Vec<f64> = species
            .iter()
            .map(interaction_radius)
            .collect::<Result<_, _>>()?;
        let kinds: Vec<usize> = cell
            .sites
            .iter()
            .map(|s| species.iter().position(|e| e.symbol == s.element).unwrap())
            .collect();
        let positions: Vec<[f64; 3]> = cell.sites.iter().map(|s| lattice.to_abs(s.frac)).collect();
        Ok(Self {
            source: cell.name.clone(),
            origin_distances: positions.iter().map(|p| norm(*p)).collect(),
            interaction_radii: kinds.iter().map(|&k| radii[k]).collect(),
            center: lattice.to_abs([0.5; 3]),
            unit_cell_dmin: unit_cell_dmin(cell, &lattice),
            positions,
            kinds,
            species,
        })
    }

    /// Atoms within `radius` of the origin, order preserved.
    pub fn within(&self, radius: f64) -> AtomCloud {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.origin_distances[i] <= radius)
            .collect();
        self.subset(&keep)
    }

    pub fn subset(&self, idx: &[usize]) -> AtomCloud {
        AtomCloud {
            source: self.source.clone(),
            positions: idx.iter().map(|&i| self.positions[i]).collect(),
            kinds: idx.iter().map(|&i| self.kinds[i]).collect(),
            species: self.species.clone(),
            interaction_radii: idx.iter().map(|&i| self.interaction_radii[i]).collect(),
            origin_distances: idx.iter().map(|&i| self.origin_distances[i]).collect(),
            center: self.center,
            unit_cell_dmin: self.unit_cell_dmin,
        }
    }

    /// Largest `r_i + r_j` over the species present.
    pub fn max_threshold(&self) -> f64 {
        2.0 * self.interaction_radii.iter().copied().fold(0.0, f64::max)
    }
}

fn norm(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn unit_cell_dmin(cell: &UnitCell, lattice: &Lattice) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in cell.sites.iter().enumerate() {
        for b in &cell.sites[i..] {
            for n in 0..27 {
                let t = [(n % 3) as f64 - 1.0, ((n / 3) % 3) as f64 - 1.0, (n / 9) as f64 - 1.0];
                let f = [
                    b.frac[0] - a.frac[0] + t[0],
                    b.frac[1] - a.frac[1] + t[1],
                    b.frac[2] - a.frac[2] + t[2],
                ];
                let d = norm(lattice.to_abs(f));
                if d > 1e-8 && d < best {
                    best = d;
                }
            }
        }
    }
    best
}

/// Replications per lattice direction: `ceil((max_diameter + 5) / L_i)`.
pub fn replication_counts(
    cell: &UnitCell,
    max_diameter: f64,
    cap: usize,
) -> Result<[usize; 3], NanogenError> {
    let lengths = [cell.a, cell.b, cell.c];
    let mut n = [0usize; 3];
    for axis in 0..3 {
        let needed = ((max_diameter + SUPERCELL_PADDING) / lengths[axis]).ceil().max(1.0);
        if !needed.is_finite() || needed > cap as f64 {
            return Err(NanogenError::CellTooLarge {
                axis,
                needed: if needed.is_finite() { needed as usize } else { usize::MAX },
                cap,
            });
        }
        n[axis] = needed as usize;
    }
    Ok(n)
}

/// Tiles an expanded cell into a block that spans at least
/// `max_diameter + 5` Å along each lattice direction.
pub fn build_supercell(
    cell: &UnitCell,
    max_diameter: f64,
    table: &ElementTable,
    cap: usize,
) -> Result<AtomCloud, NanogenError> {
    if !(max_diameter > 0.0) {
        return Err(NanogenError::InvalidInput(format!("max_diameter {max_diameter}")));
    }
    let n = replication_counts(cell, max_diameter, cap)?;
    let base = AtomCloud::from_cell(cell, table)?;
    let lattice = cell.lattice();
    let total = n[0] * n[1] * n[2] * base.len();
    let mut positions = Vec::with_capacity(total);
    let mut kinds = Vec::with_capacity(total);
    let mut radii = Vec::with_capacity(total);
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let shift = lattice.to_abs([i as f64, j as f64, k as f64]);
                for (s, p) in base.positions.iter().enumerate() {
                    positions.push([p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]);
                    kinds.push(base.kinds[s]);
                    radii.push(base.interaction_radii[s]);
                }
            }
        }
    }
    Ok(AtomCloud {
        source: base.source,
        origin_distances: positions.iter().map(|p| norm(*p)).collect(),
        center: lattice.to_abs([n[0] as f64 / 2.0, n[1] as f64 / 2.0, n[2] as f64 / 2.0]),
        unit_cell_dmin: base.unit_cell_dmin,
        positions,
        kinds,
        species: base.species,
        interaction_radii: radii,
    })
}

/// Moves the metal atom nearest the block centre to the origin.
/// Ties within 1e-9 Å go to the lowest index.
pub fn center_cloud(cloud: &AtomCloud) -> Result<AtomCloud, NanogenError> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..cloud.len() {
        if !cloud.is_metal(i) {
            continue;
        }
        let d = dist(cloud.positions[i], cloud.center);
        if best.is_none_or(|(_, bd)| d < bd - 1e-9) {
            best = Some((i, d));
        }
    }
    let (idx, _) = best.ok_or(NanogenError::NoMetalAtom)?;
    let o = cloud.positions[idx];
    let positions: Vec<[f64; 3]> = cloud
        .positions
        .iter()
        .map(|p| [p[0] - o[0], p[1] - o[1], p[2] - o[2]])
        .collect();
    let mut out = cloud.clone();
    out.origin_distances = positions.iter().map(|p| norm(*p)).collect();
    out.origin_distances[idx] = 0.0;
    out.positions = positions;
    out.positions[idx] = [0.0; 3];
    out.center = [
        cloud.center[0] - o[0],
        cloud.center[1] - o[1],
        cloud.center[2] - o[2],
    ];
    Ok(out)
}

/// Undirected edges, `i < j`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeList {
    pub pairs: Vec<[usize; 2]>,
    pub distances: Vec<f64>,
    /// Whether the uniform fallback radius was used.
    pub fallback: bool,
}

impl EdgeList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Pairs with `|p_i − p_j| ≤ r_i + r_j`, found on a uniform grid.
fn overlap_pairs(positions: &[[f64; 3]], radii: &[f64]) -> EdgeList {
    let n = positions.len();
    let mut out = EdgeList::default();
    if n < 2 {
        return out;
    }
    let reach = 2.0 * radii.iter().copied().fold(0.0, f64::max);
    if !(reach > 0.0) {
        return out;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for p in positions {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    // Enlarge cells if the grid would have far more cells than atoms.
    let mut size = reach;
    let dims = |size: f64| [0, 1, 2].map(|k| ((hi[k] - lo[k]) / size) as usize + 1);
    while dims(size).iter().product::<usize>() > 8 * n + 64 {
        size *= 1.5;
    }
    let dim = dims(size);
    let cell_of = |p: &[f64; 3]| -> [usize; 3] {
        [0, 1, 2].map(|k| (((p[k] - lo[k]) / size) as usize).min(dim[k] - 1))
    };
    let flat = |c: [usize; 3]| (c[2] * dim[1] + c[1]) * dim[0] + c[0];
    let ncell = dim[0] * dim[1] * dim[2];
    let mut start = vec![0usize; ncell + 1];
    let cells: Vec<[usize; 3]> = positions.iter().map(cell_of).collect();
    for c in &cells {
        start[flat(*c) + 1] += 1;
    }
    for i in 0..ncell {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut members = vec![0usize; n];
    for (i, c) in cells.iter().enumerate() {
        let f = flat(*c);
        members[fill[f]] = i;
        fill[f] += 1;
    }
    let mut row: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        let c = cells[i];
        row.clear();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nc = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                    if (0..3).any(|k| nc[k] < 0 || nc[k] >= dim[k] as i64) {
                        continue;
                    }
                    let f = flat([nc[0] as usize, nc[1] as usize, nc[2] as usize]);
                    for &j in &members[start[f]..start[f + 1]] {
                        if j <= i {
                            continue;
                        }
                        let d = dist(positions[i], positions[j]);
                        if d <= radii[i] + radii[j] {
                            row.push((j, d));
                        }
                    }
                }
            }
        }
        row.sort_by_key(|&(j, _)| j);
        for &(j, d) in &row {
            out.pairs.push([i, j]);
            out.distances.push(d);
        }
    }
    out
}

/// Edges between overlapping interaction neighbourhoods.
///
/// When no pair overlaps, every radius is reset to 0.55 × the smallest
/// unit-cell distance and the edges are rebuilt.
pub fn build_edges(cloud: &AtomCloud) -> EdgeList {
    let edges = overlap_pairs(&cloud.positions, &cloud.interaction_radii);
    if !edges.is_empty() {
        return edges;
    }
    build_edges_with(cloud, true)
}

/// Edges under a fallback decision made elsewhere, e.g. on the whole crystal
/// rather than on a cropped cloud.
pub fn build_edges_with(cloud: &AtomCloud, fallback: bool) -> EdgeList {
    if !fallback || cloud.len() < 2 || !cloud.unit_cell_dmin.is_finite() {
        return overlap_pairs(&cloud.positions, &cloud.interaction_radii);
    }
    let r = FALLBACK_RADIUS_FACTOR * cloud.unit_cell_dmin;
    let mut edges = overlap_pairs(&cloud.positions, &vec![r; cloud.len()]);
    edges.fallback = true;
    edges
}

/// Whether any two atoms of the infinite crystal overlap.
pub fn crystal_has_overlap(cell: &UnitCell, table: &ElementTable) -> Result<bool, NanogenError> {
    let uc = AtomCloud::from_cell(cell, table)?;
    let lattice = cell.lattice();
    let reach = uc.max_threshold();
    let span = lattice.plane_spacings().map(|h| (reach / h).ceil() as i64 + 1);
    for i in 0..uc.len() {
        for j in i..uc.len() {
            let thr = uc.interaction_radii[i] + uc.interaction_radii[j];
            for t0 in -span[0]..=span[0] {
                for t1 in -span[1]..=span[1] {
                    for t2 in -span[2]..=span[2] {
                        let shift = lattice.to_abs([t0 as f64, t1 as f64, t2 as f64]);
                        let q = uc.positions[j];
                        let d = dist(uc.positions[i], [q[0] + shift[0], q[1] + shift[1], q[2] + shift[2]]);
                        if d > 1e-8 && d <= thr {
                            return Ok(true);
                        }
                    }
                }
            }
        }
    }
    Ok(false)
}

/// Sorted indices of the atoms in the particle of `radius`.
///
/// Metals are kept when `|p| ≤ radius`. Non-metals are kept when
/// `|p| ≤ radius` or when they share an edge with a kept metal.
pub fn cut_nanoparticle(
    cloud: &AtomCloud,
    edges: &EdgeList,
    radius: f64,
) -> Result<Vec<usize>, NanogenError> {
    let mut keep: Vec<bool> = (0..cloud.len())
        .map(|i| cloud.origin_distances[i] <= radius)
        .collect();
    for &[i, j] in &edges.pairs {
        let core = |k: usize| cloud.is_metal(k) && cloud.origin_distances[k] <= radius;
        if core(i) && !cloud.is_metal(j) {
            keep[j] = true;
        }
        if core(j) && !cloud.is_metal(i) {
            keep[i] = true;
        }
    }
    let idx: Vec<usize> = (0..cloud.len()).filter(|&i| keep[i]).collect();
    if idx.is_empty() {
        return Err(NanogenError::EmptyParticle(radius));
    }
    Ok(idx)
}

/// Table-2 style labels of one particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphLabels {
    pub crystal_type: String,
    pub space_group_symbol: String,
    pub space_group_number: i64,
    pub crystal_system: String,
    pub crystal_system_number: i64,
    pub atomic_species: Vec<i64>,
    pub n_atomic_species: i64,
    pub np_size: f64,
    pub n_atoms: i64,
    pub n_bonds: i64,
    pub cell_params: [f64; 6],
    pub unit_cell_node_feat: Vec<[f64; 4]>,
    pub unit_cell_edge_index: Vec<[i64; 2]>,
    pub unit_cell_edge_feat: Vec<f64>,
    pub unit_cell_pos_abs: Vec<[f64; 3]>,
    pub unit_cell_pos_frac: Vec<[f64; 3]>,
    pub unit_cell_n_atoms: i64,
    pub unit_cell_n_bonds: i64,
    pub scattering: ScatteringSet,
}

/// One nanoparticle as a graph with node, edge and graph-level data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NanoparticleGraph {
    pub id: String,
    /// `[atomic_number, atomic_radius, atomic_weight, electron_affinity]`
    pub x: Vec<[f64; 4]>,
    /// Directed COO pairs, both directions, sorted.
    pub edge_index: Vec<[i64; 2]>,
    pub edge_attr: Vec<f64>,
    pub pos_abs: Vec<[f64; 3]>,
    pub pos_frac: Vec<[f64; 3]>,
    pub y: GraphLabels,
}

pub fn node_features(e: &ElementRecord) -> [f64; 4] {
    [
        e.atomic_number as f64,
        e.slater_radius,
        e.atomic_weight,
        e.electron_affinity_or_zero(),
    ]
}

/// Both directions of each undirected edge with endpoints remapped, sorted.
fn directed(pairs: &[[usize; 2]], dists: &[f64], map: &dyn Fn(usize) -> Option<usize>) -> (Vec<[i64; 2]>, Vec<f64>) {
    let mut out: Vec<([i64; 2], f64)> = Vec::with_capacity(2 * pairs.len());
    for (&[i, j], &d) in pairs.iter().zip(dists) {
        if let (Some(a), Some(b)) = (map(i), map(j)) {
            out.push(([a as i64, b as i64], d));
            out.push(([b as i64, a as i64], d));
        }
    }
    out.sort_by_key(|e| e.0);
    out.into_iter().unzip()
}

/// Largest pairwise distance.
pub fn max_pair_distance(positions: &[[f64; 3]]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            best = best.max(dist(positions[i], positions[j]));
        }
    }
    best
}

/// Assembles the graph record for the atoms `included` of `cloud`.
pub fn assemble_graph(
    id: impl Into<String>,
    cell: &UnitCell,
    cloud: &AtomCloud,
    included: &[usize],
    edges: &EdgeList,
    scattering: ScatteringSet,
    table: &ElementTable,
) -> Result<NanoparticleGraph, NanogenError> {
    if included.is_empty() {
        return Err(NanogenError::EmptyParticle(0.0));
    }
    let mut new_index = vec![usize::MAX; cloud.len()];
    for (k, &i) in included.iter().enumerate() {
        new_index[i] = k;
    }
    let map = |i: usize| Some(new_index[i]).filter(|&k| k != usize::MAX);
    let (edge_index, edge_attr) = directed(&edges.pairs, &edges.distances, &map);

    let lattice = cell.lattice();
    let pos_abs: Vec<[f64; 3]> = included.iter().map(|&i| cloud.positions[i]).collect();
    let pos_frac: Vec<[f64; 3]> = pos_abs.iter().map(|p| lattice.to_frac(*p)).collect();
    let x: Vec<[f64; 4]> = included.iter().map(|&i| node_features(cloud.element(i))).collect();
    let mut species: Vec<i64> = included
        .iter()
        .map(|&i| cloud.element(i).atomic_number as i64)
        .collect();
    species.sort_unstable();
    species.dedup();

    let uc = AtomCloud::from_cell(cell, table)?;
    let uc_edges = build_edges(&uc);
    let (uc_edge_index, uc_edge_feat) = directed(&uc_edges.pairs, &uc_edges.distances, &|i| Some(i));
    let system = crystal_system_of(cell.spacegroup_number as i64)?;

    Ok(NanoparticleGraph {
        id: id.into(),
        y: GraphLabels {
            crystal_type: cell.crystal_type.clone().unwrap_or_else(|| "Unknown".into()),
            space_group_symbol: cell.spacegroup_symbol.clone(),
            space_group_number: cell.spacegroup_number as i64,
            crystal_system: system.name().to_string(),
            crystal_system_number: system.number() as i64,
            n_atomic_species: species.len() as i64,
            atomic_species: species,
            np_size: max_pair_distance(&pos_abs),
            n_atoms: included.len() as i64,
            n_bonds: edge_index.len() as i64,
            cell_params: cell.params(),
            unit_cell_node_feat: (0..uc.len()).map(|i| node_features(uc.element(i))).collect(),
            unit_cell_n_atoms: uc.len() as i64,
            unit_cell_n_bonds: uc_edge_index.len() as i64,
            unit_cell_edge_index: uc_edge_index,
            unit_cell_edge_feat: uc_edge_feat,
            unit_cell_pos_abs: uc.positions.clone(),
            unit_cell_pos_frac: cell.sites.iter().map(|s| s.frac).collect(),
            scattering,
        },
        x,
        edge_index,
        edge_attr,
        pos_abs,
        pos_frac,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(els: &[&str], pos: &[[f64; 3]]) -> AtomCloud {
        let t = ElementTable::builtin();
        let mut species: Vec<ElementRecord> = Vec::new();
        for e in els {
            if !species.iter().any(|s| &s.symbol == e) {
                species.push(t.lookup(*e).unwrap().clone());
            }
        }
        let kinds: Vec<usize> = els
            .iter()
            .map(|e| species.iter().position(|s| &s.symbol == e).unwrap())
            .collect();
        AtomCloud {
            source: "t".into(),
            interaction_radii: kinds.iter().map(|&k| interaction_radius(&species[k]).unwrap()).collect(),
            origin_distances: pos.iter().map(|p| norm(*p)).collect(),
            positions: pos.to_vec(),
            kinds,
            species,
            center: [0.0; 3],
            unit_cell_dmin: f64::INFINITY,
        }
    }

    #[test]
    fn copper_oxygen_threshold() {
        let near = cloud(&["Cu", "O"], &[[0.0; 3], [2.0, 0.0, 0.0]]);
        let e = build_edges(&near);
        assert_eq!(e.pairs, vec![[0, 1]]);
        assert!(!e.fallback);
        let far = cloud(&["Cu", "O"], &[[0.0; 3], [2.5, 0.0, 0.0]]);
        assert!(build_edges(&far).is_empty());
    }

    #[test]
    fn fallback_radius() {
        let mut c = cloud(&["Cu", "O"], &[[0.0; 3], [3.0, 0.0, 0.0]]);
        c.interaction_radii = vec![0.01, 0.01];
        c.unit_cell_dmin = 3.0;
        let e = build_edges(&c);
        assert!(e.fallback);
        assert_eq!(e.pairs, vec![[0, 1]]);
        c.positions[1] = [3.31, 0.0, 0.0];
        assert!(build_edges(&c).is_empty());
    }

    #[test]
    fn centering_rules() {
        let mut c = cloud(&["Cu"], &[[1.0, 2.0, 3.0]]);
        c.center = [7.0, 7.0, 7.0];
        let out = center_cloud(&c).unwrap();
        assert_eq!(out.positions[0], [0.0; 3]);

        let mut c = cloud(&["O", "Cu", "Cu"], &[[0.0; 3], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
        c.center = [0.0; 3];
        let out = center_cloud(&c).unwrap();
        assert_eq!(out.positions[1], [0.0; 3]);
        assert_eq!(out.positions[2], [-2.0, 0.0, 0.0]);

        let c = cloud(&["O", "O"], &[[0.0; 3], [1.0, 0.0, 0.0]]);
        assert_eq!(center_cloud(&c), Err(NanogenError::NoMetalAtom));
    }

    #[test]
    fn cutout_boundaries() {
        let c = cloud(
            &["Cu", "Cu", "Cu", "O"],
            &[[0.0; 3], [5.0, 0.0, 0.0], [0.0, 5.1, 0.0], [0.0, 0.0, -5.4]],
        );
        let mut edges = build_edges(&c);
        assert!(edges.is_empty());
        // Oxygen bonded to a core metal at 4.9 Å.
        let c2 = cloud(&["Cu", "O"], &[[0.0, 0.0, -4.9], [0.0, 0.0, -5.4]]);
        edges = build_edges(&c2);
        assert_eq!(cut_nanoparticle(&c2, &edges, 5.0).unwrap(), vec![0, 1]);
        let kept = cut_nanoparticle(&c, &build_edges(&c), 5.0).unwrap();
        assert_eq!(kept, vec![0, 1]);
        assert!(matches!(
            cut_nanoparticle(&c2.subset(&[1]), &EdgeList::default(), 1.0),
            Err(NanogenError::EmptyParticle(_))
        ));
    }
}
