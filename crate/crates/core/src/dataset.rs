//! Dataset directories: per-graph binary records, a JSON manifest, splits
//! and summary statistics.
//!
//! # Record format
//!
//! A record file is a sequence of fields followed by an 8-byte checksum.
//! Each field is laid out as
//!
//! | bytes     | content                                   |
//! |-----------|-------------------------------------------|
//! | 2         | name length `L`, u16 LE                   |
//! | L         | field name, UTF-8                         |
//! | 1         | dtype: 0 = i64, 1 = f64                   |
//! | 1         | rank `R` (0 for scalars)                  |
//! | 8·R       | dims, u64 LE each                         |
//! | 8·Πdims   | payload, little-endian, row-major         |
//!
//! Strings are stored as rank-1 i64 arrays of their UTF-8 bytes. The first
//! field is always `format_version`. The trailing checksum is FNV-1a 64 over
//! every preceding byte, stored u64 LE.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debye::{CurveKind, ScatteringCurve, ScatteringSet};
use crate::nanogen::{GraphLabels, NanoparticleGraph};

pub const FORMAT_VERSION: i64 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRAPH_DIR: &str = "graphs";
pub const RECORD_EXT: &str = "bin";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(String),
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: i64, expected: i64 },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("class {0} has {1} records, fewer than requested")]
    InsufficientClass(i64, usize),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("empty dataset")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// FNV-1a, 64 bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
enum Data {
    Int(Vec<i64>),
    Float(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
struct Field {
    name: String,
    dims: Vec<u64>,
    data: Data,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn header(&mut self, name: &str, dtype: u8, dims: &[u64]) {
        self.buf.extend((name.len() as u16).to_le_bytes());
        self.buf.extend(name.as_bytes());
        self.buf.push(dtype);
        self.buf.push(dims.len() as u8);
        for d in dims {
            self.buf.extend(d.to_le_bytes());
        }
    }

    fn ints(&mut self, name: &str, dims: &[u64], v: impl IntoIterator<Item = i64>) {
        self.header(name, 0, dims);
        for x in v {
            self.buf.extend(x.to_le_bytes());
        }
    }

    fn floats(&mut self, name: &str, dims: &[u64], v: impl IntoIterator<Item = f64>) {
        self.header(name, 1, dims);
        for x in v {
            self.buf.extend(x.to_le_bytes());
        }
    }

    fn string(&mut self, name: &str, s: &str) {
        self.ints(name, &[s.len() as u64], s.bytes().map(i64::from));
    }

    fn curve(&mut self, name: &str, c: &ScatteringCurve) {
        let m = c.values.len() as u64;
        self.floats(name, &[2, m], c.grid.iter().chain(&c.values).copied());
    }
}

fn rows<const N: usize>(v: &[[f64; N]]) -> impl Iterator<Item = f64> + '_ {
    v.iter().flat_map(|r| r.iter().copied())
}

fn irows(v: &[[i64; 2]]) -> impl Iterator<Item = i64> + '_ {
    // COO layout: all sources, then all targets.
    v.iter().map(|e| e[0]).chain(v.iter().map(|e| e[1]))
}

/// Serializes a graph into record bytes, checksum included.
pub fn encode_record(g: &NanoparticleGraph) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    let y = &g.y;
    let n = g.x.len() as u64;
    let nb = g.edge_index.len() as u64;
    let m = y.unit_cell_node_feat.len() as u64;
    let mb = y.unit_cell_edge_index.len() as u64;
    w.ints("format_version", &[], [FORMAT_VERSION]);
    w.string("id", &g.id);
    w.floats("x", &[n, 4], rows(&g.x));
    w.ints("edge_index", &[2, nb], irows(&g.edge_index));
    w.floats("edge_attr", &[nb, 1], g.edge_attr.iter().copied());
    w.floats("pos_abs", &[n, 3], rows(&g.pos_abs));
    w.floats("pos_frac", &[n, 3], rows(&g.pos_frac));
    w.string("y.crystal_type", &y.crystal_type);
    w.string("y.space_group_symbol", &y.space_group_symbol);
    w.ints("y.space_group_number", &[], [y.space_group_number]);
    w.string("y.crystal_system", &y.crystal_system);
    w.ints("y.crystal_system_number", &[], [y.crystal_system_number]);
    w.ints("y.atomic_species", &[y.atomic_species.len() as u64], y.atomic_species.iter().copied());
    w.ints("y.n_atomic_species", &[], [y.n_atomic_species]);
    w.floats("y.np_size", &[], [y.np_size]);
    w.ints("y.n_atoms", &[], [y.n_atoms]);
    w.ints("y.n_bonds", &[], [y.n_bonds]);
    w.floats("y.cell_params", &[6], y.cell_params);
    w.floats("y.unit_cell_node_feat", &[m, 4], rows(&y.unit_cell_node_feat));
    w.ints("y.unit_cell_edge_index", &[2, mb], irows(&y.unit_cell_edge_index));
    w.floats("y.unit_cell_edge_feat", &[mb, 1], y.unit_cell_edge_feat.iter().copied());
    w.floats("y.unit_cell_pos_abs", &[m, 3], rows(&y.unit_cell_pos_abs));
    w.floats("y.unit_cell_pos_frac", &[m, 3], rows(&y.unit_cell_pos_frac));
    w.ints("y.unit_cell_n_atoms", &[], [y.unit_cell_n_atoms]);
    w.ints("y.unit_cell_n_bonds", &[], [y.unit_cell_n_bonds]);
    for kind in CurveKind::ALL {
        w.curve(&format!("y.{}", kind.name()), y.scattering.get(kind));
    }
    let sum = fnv1a64(&w.buf);
    w.buf.extend(sum.to_le_bytes());
    w.buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], DatasetError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DatasetError::Malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, DatasetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn field(&mut self) -> Result<Field, DatasetError> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| DatasetError::Malformed("field name is not UTF-8".into()))?;
        let dtype = self.take(1)?[0];
        let rank = self.take(1)?[0] as usize;
        let dims = (0..rank).map(|_| self.u64()).collect::<Result<Vec<_>, _>>()?;
        let count = dims
            .iter()
            .try_fold(1u64, |a, &d| a.checked_mul(d))
            .filter(|&c| c.saturating_mul(8) <= (self.bytes.len() - self.pos) as u64)
            .ok_or_else(|| DatasetError::Malformed(format!("{name}: shape exceeds file")))?
            as usize;
        let raw = self.take(8 * count)?;
        let words = raw.chunks_exact(8).map(|c| c.try_into().unwrap());
        let data = match dtype {
            0 => Data::Int(words.map(i64::from_le_bytes).collect()),
            1 => Data::Float(words.map(f64::from_le_bytes).collect()),
            t => return Err(DatasetError::Malformed(format!("{name}: dtype {t}"))),
        };
        Ok(Field { name, dims, data })
    }
}

struct Fields(BTreeMap<String, Field>);

impl Fields {
    fn get(&self, name: &str) -> Result<&Field, DatasetError> {
        self.0
            .get(name)
            .ok_or_else(|| DatasetError::Malformed(format!("missing field {name}")))
    }

    fn ints(&self, name: &str) -> Result<(&[u64], &[i64]), DatasetError> {
        match self.get(name)? {
            Field { dims, data: Data::Int(v), .. } => Ok((dims, v)),
            _ => Err(DatasetError::Malformed(format!("{name}: expected i64"))),
        }
    }

    fn floats(&self, name: &str) -> Result<(&[u64], &[f64]), DatasetError> {
        match self.get(name)? {
            Field { dims, data: Data::Float(v), .. } => Ok((dims, v)),
            _ => Err(DatasetError::Malformed(format!("{name}: expected f64"))),
        }
    }

    fn int(&self, name: &str) -> Result<i64, DatasetError> {
        match self.ints(name)? {
            ([], [v]) => Ok(*v),
            _ => Err(DatasetError::Malformed(format!("{name}: expected scalar"))),
        }
    }

    fn float(&self, name: &str) -> Result<f64, DatasetError> {
        match self.floats(name)? {
            ([], [v]) => Ok(*v),
            _ => Err(DatasetError::Malformed(format!("{name}: expected scalar"))),
        }
    }

    fn string(&self, name: &str) -> Result<String, DatasetError> {
        let (_, v) = self.ints(name)?;
        let bytes = v
            .iter()
            .map(|&b| u8::try_from(b))
            .collect::<Result<Vec<u8>, _>>()
            .map_err(|_| DatasetError::Malformed(format!("{name}: not a byte string")))?;
        String::from_utf8(bytes).map_err(|_| DatasetError::Malformed(format!("{name}: not UTF-8")))
    }

    fn matrix<const N: usize>(&self, name: &str) -> Result<Vec<[f64; N]>, DatasetError> {
        let (dims, v) = self.floats(name)?;
        if dims.len() != 2 || dims[1] != N as u64 {
            return Err(DatasetError::Malformed(format!("{name}: expected [n, {N}]")));
        }
        Ok(v.chunks_exact(N).map(|c| c.try_into().unwrap()).collect())
    }

    fn column(&self, name: &str) -> Result<Vec<f64>, DatasetError> {
        let (dims, v) = self.floats(name)?;
        match dims {
            [_] | [_, 1] => Ok(v.to_vec()),
            _ => Err(DatasetError::Malformed(format!("{name}: expected a column"))),
        }
    }

    fn coo(&self, name: &str) -> Result<Vec<[i64; 2]>, DatasetError> {
        let (dims, v) = self.ints(name)?;
        if dims.len() != 2 || dims[0] != 2 {
            return Err(DatasetError::Malformed(format!("{name}: expected [2, n]")));
        }
        let n = dims[1] as usize;
        Ok((0..n).map(|k| [v[k], v[n + k]]).collect())
    }

    fn curve(&self, kind: CurveKind) -> Result<ScatteringCurve, DatasetError> {
        let name = format!("y.{}", kind.name());
        let (dims, v) = self.floats(&name)?;
        if dims.len() != 2 || dims[0] != 2 {
            return Err(DatasetError::Malformed(format!("{name}: expected [2, m]")));
        }
        let m = dims[1] as usize;
        Ok(ScatteringCurve {
            kind,
            grid: v[..m].to_vec(),
            values: v[m..].to_vec(),
        })
    }
}

/// Parses and validates record bytes.
pub fn decode_record(bytes: &[u8], source: &str) -> Result<NanoparticleGraph, DatasetError> {
    if bytes.len() < 8 {
        return Err(DatasetError::ChecksumMismatch(source.to_string()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if fnv1a64(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(DatasetError::ChecksumMismatch(source.to_string()));
    }
    let mut r = Reader { bytes: body, pos: 0 };
    let mut fields = BTreeMap::new();
    while r.pos < body.len() {
        let f = r.field()?;
        if fields.is_empty() {
            let version = match (&f.name[..], &f.data) {
                ("format_version", Data::Int(v)) if v.len() == 1 => v[0],
                _ => return Err(DatasetError::Malformed("first field must be format_version".into())),
            };
            if version != FORMAT_VERSION {
                return Err(DatasetError::SchemaVersionMismatch {
                    found: version,
                    expected: FORMAT_VERSION,
                });
            }
        }
        if fields.insert(f.name.clone(), f).is_some() {
            return Err(DatasetError::Malformed("duplicate field".into()));
        }
    }
    let f = Fields(fields);
    let curve = |k| f.curve(k);
    let g = NanoparticleGraph {
        id: f.string("id")?,
        x: f.matrix("x")?,
        edge_index: f.coo("edge_index")?,
        edge_attr: f.column("edge_attr")?,
        pos_abs: f.matrix("pos_abs")?,
        pos_frac: f.matrix("pos_frac")?,
        y: GraphLabels {
            crystal_type: f.string("y.crystal_type")?,
            space_group_symbol: f.string("y.space_group_symbol")?,
            space_group_number: f.int("y.space_group_number")?,
            crystal_system: f.string("y.crystal_system")?,
            crystal_system_number: f.int("y.crystal_system_number")?,
            atomic_species: f.ints("y.atomic_species")?.1.to_vec(),
            n_atomic_species: f.int("y.n_atomic_species")?,
            np_size: f.float("y.np_size")?,
            n_atoms: f.int("y.n_atoms")?,
            n_bonds: f.int("y.n_bonds")?,
            cell_params: f
                .floats("y.cell_params")?
                .1
                .try_into()
                .map_err(|_| DatasetError::Malformed("y.cell_params: expected 6 values".into()))?,
            unit_cell_node_feat: f.matrix("y.unit_cell_node_feat")?,
            unit_cell_edge_index: f.coo("y.unit_cell_edge_index")?,
            unit_cell_edge_feat: f.column("y.unit_cell_edge_feat")?,
            unit_cell_pos_abs: f.matrix("y.unit_cell_pos_abs")?,
            unit_cell_pos_frac: f.matrix("y.unit_cell_pos_frac")?,
            unit_cell_n_atoms: f.int("y.unit_cell_n_atoms")?,
            unit_cell_n_bonds: f.int("y.unit_cell_n_bonds")?,
            scattering: ScatteringSet {
                saxs: curve(CurveKind::Saxs)?,
                sans: curve(CurveKind::Sans)?,
                xrd: curve(CurveKind::Xrd)?,
                nd: curve(CurveKind::Nd)?,
                xpdf: curve(CurveKind::Xpdf)?,
                npdf: curve(CurveKind::Npdf)?,
            },
        },
    };
    validate_graph(&g)?;
    Ok(g)
}

fn check_edges(
    what: &str,
    n: usize,
    edges: &[[i64; 2]],
    attr: &[f64],
    pos: &[[f64; 3]],
) -> Result<(), DatasetError> {
    let bad = |m: &str| DatasetError::InvariantViolation(format!("{what}: {m}"));
    if attr.len() != edges.len() {
        return Err(bad("attribute count differs from edge count"));
    }
    let set: BTreeSet<[i64; 2]> = edges.iter().copied().collect();
    if set.len() != edges.len() {
        return Err(bad("duplicate edge"));
    }
    for (e, &d) in edges.iter().zip(attr) {
        let [i, j] = *e;
        if i == j {
            return Err(bad("self-loop"));
        }
        if i < 0 || j < 0 || i as usize >= n || j as usize >= n {
            return Err(bad("index out of range"));
        }
        if !set.contains(&[j, i]) {
            return Err(bad("edge without reverse"));
        }
        let (a, b) = (pos[i as usize], pos[j as usize]);
        let r = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        if (r - d).abs() > 1e-9 {
            return Err(bad("distance differs from positions"));
        }
    }
    Ok(())
}

/// Checks every structural invariant of a graph record.
pub fn validate_graph(g: &NanoparticleGraph) -> Result<(), DatasetError> {
    let bad = |f: &str| Err(DatasetError::InvariantViolation(f.to_string()));
    let y = &g.y;
    let n = g.x.len();
    if n == 0 {
        return bad("x");
    }
    if g.pos_abs.len() != n {
        return bad("pos_abs");
    }
    if g.pos_frac.len() != n {
        return bad("pos_frac");
    }
    check_edges("edge_index", n, &g.edge_index, &g.edge_attr, &g.pos_abs)?;
    if y.n_atoms != n as i64 {
        return bad("y.n_atoms");
    }
    if y.n_bonds != g.edge_index.len() as i64 || y.n_bonds % 2 != 0 {
        return bad("y.n_bonds");
    }
    let species: BTreeSet<i64> = g.x.iter().map(|r| r[0] as i64).collect();
    let listed: BTreeSet<i64> = y.atomic_species.iter().copied().collect();
    if species != listed || listed.len() != y.atomic_species.len() {
        return bad("y.atomic_species");
    }
    if y.n_atomic_species != listed.len() as i64 {
        return bad("y.n_atomic_species");
    }
    let m = y.unit_cell_node_feat.len();
    if y.unit_cell_pos_abs.len() != m || y.unit_cell_pos_frac.len() != m || y.unit_cell_n_atoms != m as i64 {
        return bad("y.unit_cell_n_atoms");
    }
    check_edges(
        "y.unit_cell_edge_index",
        m,
        &y.unit_cell_edge_index,
        &y.unit_cell_edge_feat,
        &y.unit_cell_pos_abs,
    )?;
    if y.unit_cell_n_bonds != y.unit_cell_edge_index.len() as i64 {
        return bad("y.unit_cell_n_bonds");
    }
    if !(1..=7).contains(&y.crystal_system_number) {
        return bad("y.crystal_system_number");
    }
    for c in y.scattering.curves() {
        if c.grid.len() != c.values.len() {
            return Err(DatasetError::InvariantViolation(format!("y.{}", c.kind)));
        }
    }
    Ok(())
}

pub fn record_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(GRAPH_DIR).join(format!("{id}.{RECORD_EXT}"))
}

/// Writes one record; returns its checksum.
pub fn write_record(dir: &Path, g: &NanoparticleGraph) -> Result<u64, DatasetError> {
    validate_graph(g)?;
    let bytes = encode_record(g);
    let path = record_path(dir, &g.id);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&path, &bytes).map_err(io_err(&path))?;
    Ok(u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap()))
}

pub fn read_record(path: &Path) -> Result<NanoparticleGraph, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_record(&bytes, &path.display().to_string())
}

/// The per-graph numbers that statistics and manifests need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub id: String,
    pub crystal_type: String,
    pub crystal_system_number: i64,
    pub space_group_number: i64,
    pub n_atomic_species: i64,
    pub n_atoms: i64,
    pub n_bonds: i64,
    pub np_size: f64,
}

impl From<&NanoparticleGraph> for GraphSummary {
    fn from(g: &NanoparticleGraph) -> Self {
        Self {
            id: g.id.clone(),
            crystal_type: g.y.crystal_type.clone(),
            crystal_system_number: g.y.crystal_system_number,
            space_group_number: g.y.space_group_number,
            n_atomic_species: g.y.n_atomic_species,
            n_atoms: g.y.n_atoms,
            n_bonds: g.y.n_bonds,
            np_size: g.y.np_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded shuffle of the sorted ids, then contiguous validation and test
/// blocks of `floor(n·ratio)`; train takes the remainder.
pub fn split(ids: &[String], ratios: [f64; 3], seed: u64) -> Splits {
    let mut ids = ids.to_vec();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len();
    let take = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
    let n_val = take(ratios[1]).min(n);
    let n_test = take(ratios[2]).min(n - n_val);
    let n_train = n - n_val - n_test;
    let test = ids.split_off(n_train + n_val);
    let validation = ids.split_off(n_train);
    Splits {
        train: ids,
        validation,
        test,
    }
}

/// Exactly `per_class` ids from each class, sampled under `seed`.
pub fn stratified_subset(
    records: &[(String, i64)],
    classes: &[i64],
    per_class: usize,
    seed: u64,
) -> Result<Vec<String>, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes = classes.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut out = Vec::with_capacity(classes.len() * per_class);
    for class in classes {
        let mut members: Vec<&String> = records
            .iter()
            .filter(|(_, c)| *c == class)
            .map(|(id, _)| id)
            .collect();
        if members.len() < per_class {
            return Err(DatasetError::InsufficientClass(class, members.len()));
        }
        members.sort();
        members.shuffle(&mut rng);
        out.extend(members[..per_class].iter().map(|s| s.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub total: i64,
    pub min: i64,
    pub median: f64,
    pub max: i64,
}

impl Extrema {
    fn of(mut v: Vec<i64>) -> Self {
        v.sort_unstable();
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2] as f64
        } else {
            (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
        };
        Self {
            total: v.iter().sum(),
            min: v[0],
            median,
            max: v[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Lower bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub graphs: usize,
    pub nodes: Extrema,
    pub edges: Extrema,
    /// Counts for crystal systems 1 to 7.
    pub crystal_system: [u64; 7],
    pub crystal_type: BTreeMap<String, u64>,
    pub unique_elements: BTreeMap<i64, u64>,
    pub space_group: BTreeMap<i64, u64>,
    pub np_size: Histogram,
}

/// Summary statistics; independent of record order.
pub fn statistics(records: &[GraphSummary], np_bin_width: f64) -> Result<DatasetStats, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut crystal_system = [0u64; 7];
    let mut crystal_type = BTreeMap::new();
    let mut unique_elements = BTreeMap::new();
    let mut space_group = BTreeMap::new();
    for r in records {
        if let Some(slot) = usize::try_from(r.crystal_system_number - 1)
            .ok()
            .and_then(|i| crystal_system.get_mut(i))
        {
            *slot += 1;
        }
        *crystal_type.entry(r.crystal_type.clone()).or_insert(0) += 1;
        *unique_elements.entry(r.n_atomic_species).or_insert(0) += 1;
        *space_group.entry(r.space_group_number).or_insert(0) += 1;
    }
    let width = if np_bin_width > 0.0 { np_bin_width } else { 5.0 };
    let max_size = records.iter().map(|r| r.np_size).fold(0.0, f64::max);
    let nbins = (max_size / width).floor() as usize + 1;
    let mut counts = vec![0u64; nbins];
    for r in records {
        counts[((r.np_size / width).floor() as usize).min(nbins - 1)] += 1;
    }
    Ok(DatasetStats {
        graphs: records.len(),
        nodes: Extrema::of(records.iter().map(|r| r.n_atoms).collect()),
        edges: Extrema::of(records.iter().map(|r| r.n_bonds).collect()),
        crystal_system,
        crystal_type,
        unique_elements,
        space_group,
        np_size: Histogram {
            edges: (0..nbins).map(|k| k as f64 * width).collect(),
            counts,
        },
    })
}

impl DatasetStats {
    /// Plain-text summary table.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "graphs\t{}", self.graphs);
        for (name, e) in [("nodes", &self.nodes), ("edges", &self.edges)] {
            let _ = writeln!(
                s,
                "{name}\ttotal {}\tmin {}\tmedian {}\tmax {}",
                e.total, e.min, e.median, e.max
            );
        }
        let _ = writeln!(s, "crystal_system");
        for (k, c) in self.crystal_system.iter().enumerate() {
            let name = crate::crystal::CrystalSystem::from_number(k as u8 + 1)
                .map(|s| s.name())
                .unwrap_or("?");
            let _ = writeln!(s, "\t{}\t{name}\t{c}", k + 1);
        }
        let _ = writeln!(s, "crystal_type");
        for (t, c) in &self.crystal_type {
            let _ = writeln!(s, "\t{t}\t{c}");
        }
        let _ = writeln!(s, "unique_elements");
        for (n, c) in &self.unique_elements {
            let _ = writeln!(s, "\t{n}\t{c}");
        }
        let _ = writeln!(s, "np_size");
        for (e, c) in self.np_size.edges.iter().zip(&self.np_size.counts) {
            let _ = writeln!(s, "\t{e}\t{c}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub id: String,
    pub file: String,
    /// FNV-1a 64 of the record body, hex.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub graphs: usize,
    pub nodes: Extrema,
    pub edges: Extrema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: i64,
    pub name: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub created_unix: u64,
    pub generator_version: String,
    pub element_policy: String,
    pub radii: Vec<f64>,
    pub split_seed: u64,
    pub split_ratios: [f64; 3],
    /// Configuration text exactly as loaded.
    pub config: String,
    pub splits: Splits,
    pub records: Vec<RecordEntry>,
    pub graph_summaries: Vec<GraphSummary>,
    pub summary: Summary,
}

pub fn creation_time() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// Inputs for a manifest besides the records themselves.
#[derive(Debug, Clone)]
pub struct ManifestInfo {
    pub name: String,
    pub element_policy: String,
    pub radii: Vec<f64>,
    pub split_seed: u64,
    pub split_ratios: [f64; 3],
    pub config: String,
}

pub fn build_manifest(
    info: &ManifestInfo,
    mut summaries: Vec<GraphSummary>,
    checksums: &BTreeMap<String, u64>,
) -> Result<DatasetManifest, DatasetError> {
    if summaries.is_empty() {
        return Err(DatasetError::Empty);
    }
    summaries.sort_by(|a, b| a.id.cmp(&b.id));
    let ids: Vec<String> = summaries.iter().map(|s| s.id.clone()).collect();
    let records = ids
        .iter()
        .map(|id| {
            let sum = checksums
                .get(id)
                .ok_or_else(|| DatasetError::InvariantViolation(format!("no checksum for {id}")))?;
            Ok(RecordEntry {
                id: id.clone(),
                file: format!("{GRAPH_DIR}/{id}.{RECORD_EXT}"),
                checksum: format!("{sum:016x}"),
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let stats = statistics(&summaries, 5.0)?;
    Ok(DatasetManifest {
        schema_version: FORMAT_VERSION,
        name: info.name.clone(),
        created_unix: creation_time(),
        generator_version: env!("CARGO_PKG_VERSION").to_string(),
        element_policy: info.element_policy.clone(),
        radii: info.radii.clone(),
        split_seed: info.split_seed,
        split_ratios: info.split_ratios,
        config: info.config.clone(),
        splits: split(&ids, info.split_ratios, info.split_seed),
        records,
        graph_summaries: summaries,
        summary: Summary {
            graphs: stats.graphs,
            nodes: stats.nodes,
            edges: stats.edges,
        },
    })
}

/// Writes the manifest; call after every record is on disk.
pub fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let text = serde_json::to_string_pretty(manifest).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    let tmp = dir.join(format!("{MANIFEST_FILE}.partial"));
    fs::write(&tmp, text + "\n").map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

pub fn write_dataset(
    dir: &Path,
    records: &[NanoparticleGraph],
    info: &ManifestInfo,
) -> Result<DatasetManifest, DatasetError> {
    let mut sums = BTreeMap::new();
    for g in records {
        sums.insert(g.id.clone(), write_record(dir, g)?);
    }
    let manifest = build_manifest(info, records.iter().map(GraphSummary::from).collect(), &sums)?;
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    if m.schema_version != FORMAT_VERSION {
        return Err(DatasetError::SchemaVersionMismatch {
            found: m.schema_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(m)
}

/// Reads and verifies a dataset directory.
///
/// `visit` sees each record in manifest order, so callers need not hold the
/// whole dataset in memory.
pub fn read_dataset_with(
    dir: &Path,
    mut visit: impl FnMut(NanoparticleGraph) -> Result<(), DatasetError>,
) -> Result<DatasetManifest, DatasetError> {
    let m = read_manifest(dir)?;
    let graph_dir = dir.join(GRAPH_DIR);
    let on_disk = match fs::read_dir(&graph_dir) {
        Ok(rd) => rd
            .filter_map(Result::ok)
            .filter(|e| e.path().extension().is_some_and(|x| x == RECORD_EXT))
            .count(),
        Err(_) => 0,
    };
    if on_disk != m.records.len() || m.summary.graphs != m.records.len() {
        return Err(DatasetError::InvariantViolation(format!(
            "manifest lists {} graphs, {} record files present",
            m.records.len(),
            on_disk
        )));
    }
    let ids: BTreeSet<&String> = m.records.iter().map(|r| &r.id).collect();
    let split_ids: Vec<&String> = m.splits.train.iter().chain(&m.splits.validation).chain(&m.splits.test).collect();
    let split_set: BTreeSet<&String> = split_ids.iter().copied().collect();
    if split_set.len() != split_ids.len() || split_set != ids {
        return Err(DatasetError::InvariantViolation("splits".into()));
    }
    let mut summaries = Vec::with_capacity(m.records.len());
    for entry in &m.records {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let g = decode_record(&bytes, &entry.file)?;
        let sum = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        if format!("{sum:016x}") != entry.checksum {
            return Err(DatasetError::ChecksumMismatch(entry.file.clone()));
        }
        if g.id != entry.id {
            return Err(DatasetError::InvariantViolation(format!("id of {}", entry.file)));
        }
        summaries.push(GraphSummary::from(&g));
        visit(g)?;
    }
    if summaries != m.graph_summaries {
        return Err(DatasetError::InvariantViolation("graph_summaries".into()));
    }
    let stats = statistics(&summaries, 5.0)?;
    if stats.nodes != m.summary.nodes || stats.edges != m.summary.edges {
        return Err(DatasetError::InvariantViolation("summary".into()));
    }
    Ok(m)
}

pub fn read_dataset(dir: &Path) -> Result<(Vec<NanoparticleGraph>, DatasetManifest), DatasetError> {
    let mut out = Vec::new();
    let m = read_dataset_with(dir, |g| {
        out.push(g);
        Ok(())
    })?;
    Ok((out, m))
}
