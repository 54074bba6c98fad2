//! End-to-end generation: template cells to a packaged dataset.
//!
//! Each stage is a plain function so the command-line tool can run them
//! separately over directories and reach the same bytes as [`gen3k`].

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cif::{clean_bytes, extract_unit_cell, CifError, UnitCell};
use crate::crystal::{expand_symmetry, instantiate_template, write_cif, CrystalError, SpacegroupTable, TemplateSet};
use crate::dataset::{
    self, build_manifest, write_manifest, DatasetError, DatasetManifest, GraphSummary, ManifestInfo,
};
use crate::debye::{simulate_all, DebyeConfig, DebyeError, SumMode};
use crate::elements::{ElementError, ElementPolicy, ElementRecord, ElementTable};
use crate::nanogen::{
    assemble_graph, build_edges_with, build_supercell, center_cloud, crystal_has_overlap, cut_nanoparticle, replication_counts,
    AtomCloud, EdgeList, NanogenError, NanoparticleGraph, DEFAULT_REPLICATION_CAP, FALLBACK_RADIUS_FACTOR,
};
use crate::debye::ScatteringSet;

pub const DEFAULT_RADII: [f64; 5] = [5.0, 10.0, 15.0, 20.0, 25.0];
/// Clearance between any included atom and the tiled block boundary (Å).
pub const BOUNDARY_CLEARANCE: f64 = 2.5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{source_id}: rejected by the cleaner: {detail}")]
    Rejected { source_id: String, detail: String },
    #[error("{source_id}: {source}")]
    Cif { source_id: String, source: CifError },
    #[error("{source_id}: {source}")]
    Crystal { source_id: String, source: CrystalError },
    #[error("{source_id}: {source}")]
    Nanogen { source_id: String, source: NanogenError },
    #[error("{source_id}: {source}")]
    Debye { source_id: String, source: DebyeError },
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl PipelineError {
    /// Whether the failure traces back to user input rather than a defect.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, PipelineError::Debye { .. } | PipelineError::Nanogen { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn ctx<E>(source_id: &str, wrap: impl FnOnce(String, E) -> PipelineError) -> impl FnOnce(E) -> PipelineError {
    let id = source_id.to_string();
    move |e| wrap(id, e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub name: String,
    /// `chili3k`, `chili100k` or a policy file path.
    pub policy: String,
    /// Template file; the shipped set when absent.
    pub templates: Option<PathBuf>,
    pub radii: Vec<f64>,
    pub seed: u64,
    pub split_ratios: [f64; 3],
    pub out: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub replication_cap: usize,
    pub debye: DebyeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            name: "chili-3k".into(),
            policy: "chili3k".into(),
            templates: None,
            radii: DEFAULT_RADII.to_vec(),
            seed: 0,
            split_ratios: [0.8, 0.1, 0.1],
            out: PathBuf::from("chili-3k"),
            workers: 0,
            replication_cap: DEFAULT_REPLICATION_CAP,
            debye: DebyeConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.radii.is_empty() {
            return bad("radii must not be empty".into());
        }
        if let Some(r) = self.radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return bad(format!("radius {r} must be positive"));
        }
        let mut sorted = self.radii.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup_by(|a, b| radius_tag(*a) == radius_tag(*b));
        if sorted.len() != self.radii.len() {
            return bad("radii must be distinct".into());
        }
        let sum: f64 = self.split_ratios.iter().sum();
        if self.split_ratios.iter().any(|r| *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return bad(format!("split ratios {:?} must be non-negative and sum to 1", self.split_ratios));
        }
        if self.replication_cap == 0 {
            return bad("replication_cap must be at least 1".into());
        }
        self.debye
            .small_angle
            .validate(false)
            .and(self.debye.wide_angle.validate(true))
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load_templates(&self, table: &ElementTable) -> Result<TemplateSet, PipelineError> {
        match &self.templates {
            None => Ok(TemplateSet::builtin().clone()),
            Some(p) => TemplateSet::load(p, table).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display()))),
        }
    }

    pub fn load_policy(&self) -> Result<ElementPolicy, PipelineError> {
        Ok(ElementPolicy::from_name_or_path(&self.policy)?)
    }

    pub fn manifest_info(&self, config_text: &str) -> ManifestInfo {
        ManifestInfo {
            name: self.name.clone(),
            element_policy: self.policy.clone(),
            radii: self.radii.clone(),
            split_seed: self.seed,
            split_ratios: self.split_ratios,
            config: config_text.to_string(),
        }
    }
}

/// `r05`, `r10`, `r2p5`.
pub fn radius_tag(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("r{:02}", r as u64)
    } else {
        format!("r{}", format!("{r}").replace('.', "p"))
    }
}

/// Characters outside `[A-Za-z0-9._-]` become `_`.
pub fn sanitize_id(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

pub fn graph_id(cell_name: &str, radius: f64) -> String {
    format!("{}_{}", sanitize_id(cell_name), radius_tag(radius))
}

/// Every template with every policy metal, templates in file order and
/// metals by atomic number.
pub fn generate_cells(
    templates: &TemplateSet,
    policy: &ElementPolicy,
    table: &ElementTable,
) -> Result<Vec<UnitCell>, PipelineError> {
    let oxygen = table.lookup("O")?;
    let mut metals: Vec<&ElementRecord> = policy
        .allowed_metals
        .iter()
        .map(|s| table.lookup(s))
        .collect::<Result<_, _>>()?;
    metals.sort_by_key(|e| e.atomic_number);
    let mut cells = Vec::with_capacity(templates.len() * metals.len());
    for t in &templates.templates {
        for m in &metals {
            let cell = instantiate_template(t, m, oxygen)
                .map_err(ctx(&format!("{}/{}", t.name, m.symbol), |source_id, source| {
                    PipelineError::Crystal { source_id, source }
                }))?;
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Cleans, extracts and symmetry-expands one CIF.
pub fn load_cell(bytes: &[u8], source_id: &str, table: &SpacegroupTable) -> Result<UnitCell, PipelineError> {
    let (doc, report) = clean_bytes(bytes, source_id);
    let doc = match doc {
        Some(doc) if !report.rejected => doc,
        _ => {
            return Err(PipelineError::Rejected {
                source_id: source_id.to_string(),
                detail: format!(
                    "{}: {}",
                    report.rejection_reason.map(|r| r.to_string()).unwrap_or_default(),
                    report.detail
                ),
            })
        }
    };
    let cell = extract_unit_cell(&doc).map_err(ctx(source_id, |source_id, source| PipelineError::Cif { source_id, source }))?;
    expand_symmetry(&cell, table).map_err(ctx(source_id, |source_id, source| PipelineError::Crystal { source_id, source }))
}

/// A centered cloud cropped to what the largest radius can reach.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub cell: UnitCell,
    pub cloud: AtomCloud,
    pub edges: EdgeList,
    /// Replications used per lattice direction.
    pub replications: [usize; 3],
    /// The centered origin in fractional coordinates of the tiled block.
    pub origin_frac: [f64; 3],
}

/// Tiles, centers, crops and connects `cell` for cutouts up to `max_radius`.
///
/// The tiling starts at the `max_diameter + 5` Å rule and grows one cell
/// length at a time until every atom a cutout can include keeps at least
/// 2.5 Å from the block boundary. Cropping to `max_radius + reach` changes no
/// edge among the atoms kept; the fallback decision is made on the infinite
/// crystal so cropping cannot flip it.
pub fn prepare_cell(
    cell: &UnitCell,
    max_radius: f64,
    table: &ElementTable,
    cap: usize,
) -> Result<PreparedCell, PipelineError> {
    let nerr = |e| PipelineError::Nanogen { source_id: cell.name.clone(), source: e };
    let fallback = !crystal_has_overlap(cell, table).map_err(nerr)?;
    let lattice = cell.lattice();
    let spacing = lattice.plane_spacings();
    let step = cell.a.max(cell.b).max(cell.c);
    let mut diameter = 2.0 * max_radius;
    loop {
        let block = build_supercell(cell, diameter, table, cap).map_err(nerr)?;
        let centered = center_cloud(&block).map_err(nerr)?;
        let reach = if fallback {
            2.0 * FALLBACK_RADIUS_FACTOR * centered.unit_cell_dmin
        } else {
            centered.max_threshold()
        };
        let n = replication_counts(cell, diameter, cap).map_err(nerr)?;
        // Origin of the centered frame in block fractional coordinates.
        let shift = [
            block.center[0] - centered.center[0],
            block.center[1] - centered.center[1],
            block.center[2] - centered.center[2],
        ];
        let t = lattice.to_frac(shift);
        let need = max_radius + reach + BOUNDARY_CLEARANCE;
        let fits = (0..3).all(|k| t[k] * spacing[k] > need && (n[k] as f64 - t[k]) * spacing[k] > need);
        if fits {
            let keep: Vec<usize> = (0..centered.len())
                .filter(|&i| centered.origin_distances[i] <= max_radius + reach + 1e-9)
                .collect();
            let cloud = centered.subset(&keep);
            let edges = build_edges_with(&cloud, fallback);
            return Ok(PreparedCell {
                cell: cell.clone(),
                cloud,
                edges,
                replications: n,
                origin_frac: t,
            });
        }
        diameter += step;
    }
}

/// Graphs for each radius, scattering left empty.
pub fn cut_graphs(
    prepared: &PreparedCell,
    radii: &[f64],
    table: &ElementTable,
) -> Result<Vec<NanoparticleGraph>, PipelineError> {
    radii
        .iter()
        .map(|&r| cut_graph(prepared, r, table))
        .collect()
}

pub fn cut_graph(prepared: &PreparedCell, radius: f64, table: &ElementTable) -> Result<NanoparticleGraph, PipelineError> {
    let nerr = |e| PipelineError::Nanogen { source_id: prepared.cell.name.clone(), source: e };
    let idx = cut_nanoparticle(&prepared.cloud, &prepared.edges, radius).map_err(nerr)?;
    assemble_graph(
        graph_id(&prepared.cell.name, radius),
        &prepared.cell,
        &prepared.cloud,
        &idx,
        &prepared.edges,
        ScatteringSet::empty(),
        table,
    )
    .map_err(nerr)
}

/// Fills the six signals of `g` from its positions and atomic numbers.
pub fn simulate_graph(
    g: &mut NanoparticleGraph,
    config: &DebyeConfig,
    table: &ElementTable,
) -> Result<(), PipelineError> {
    let elements: Vec<&ElementRecord> = g
        .x
        .iter()
        .map(|row| table.lookup(row[0] as u32))
        .collect::<Result<_, _>>()?;
    g.y.scattering = simulate_all(&g.pos_abs, &elements, config, SumMode::Binned)
        .map_err(ctx(&g.id, |source_id, source| PipelineError::Debye { source_id, source }))?;
    Ok(())
}

/// Runs `f` over `items` on a pool of `workers` threads (0 = all cores).
/// Results keep input order.
pub fn run_parallel<T, R, F>(workers: usize, items: &[T], f: F) -> Result<Vec<R>, PipelineError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, PipelineError> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// One CIF through every radius: cut, simulate, write records.
/// Returns the summaries and checksums of the written records.
pub fn process_cif(
    bytes: &[u8],
    source_id: &str,
    cfg: &PipelineConfig,
    out: &Path,
    table: &ElementTable,
) -> Result<Vec<(GraphSummary, u64)>, PipelineError> {
    let cell = load_cell(bytes, source_id, SpacegroupTable::builtin())?;
    let max_radius = cfg.radii.iter().copied().fold(0.0, f64::max);
    let prepared = prepare_cell(&cell, max_radius, table, cfg.replication_cap)?;
    cfg.radii
        .par_iter()
        .map(|&r| {
            let mut g = cut_graph(&prepared, r, table)?;
            simulate_graph(&mut g, &cfg.debye, table)?;
            let sum = dataset::write_record(out, &g)?;
            Ok((GraphSummary::from(&g), sum))
        })
        .collect()
}

pub const CIF_DIR: &str = "cifs";
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Debug, Clone)]
pub struct GenReport {
    pub manifest: DatasetManifest,
    pub cifs: Vec<PathBuf>,
}

fn ensure_fresh(out: &Path) -> Result<(), PipelineError> {
    for sub in [dataset::MANIFEST_FILE, dataset::GRAPH_DIR] {
        let p = out.join(sub);
        if p.exists() {
            return Err(PipelineError::Config(format!(
                "{} already exists; choose an empty output directory",
                p.display()
            )));
        }
    }
    Ok(())
}

/// Writes one CIF per generated cell under `dir`, sorted by name.
pub fn write_template_cifs(cells: &[UnitCell], dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::with_capacity(cells.len());
    let mut names = std::collections::BTreeSet::new();
    for cell in cells {
        let name = sanitize_id(&cell.name);
        if !names.insert(name.clone()) {
            return Err(PipelineError::Config(format!("duplicate cell name {name}")));
        }
        let path = dir.join(format!("{name}.cif"));
        fs::write(&path, write_cif(cell)).map_err(io_err(&path))?;
        paths.push(path);
    }
    paths.sort();
    Ok(paths)
}

/// Processes the CIFs at `paths` into records under `out` and commits the
/// manifest. On failure an `INCOMPLETE` marker names the first error.
pub fn generate_from_cifs(
    paths: &[PathBuf],
    cfg: &PipelineConfig,
    config_text: &str,
    out: &Path,
    table: &ElementTable,
) -> Result<DatasetManifest, PipelineError> {
    ensure_fresh(out)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let result = (|| {
        let per_cif = run_parallel(cfg.workers, paths, |p| {
            let bytes = fs::read(p).map_err(io_err(p))?;
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            process_cif(&bytes, &id, cfg, out, table)
        })?;
        let mut summaries = Vec::new();
        let mut sums = BTreeMap::new();
        for (s, sum) in per_cif.into_iter().flatten() {
            if sums.insert(s.id.clone(), sum).is_some() {
                return Err(PipelineError::Config(format!("duplicate graph id {}", s.id)));
            }
            summaries.push(s);
        }
        let manifest = build_manifest(&cfg.manifest_info(config_text), summaries, &sums)?;
        write_manifest(out, &manifest)?;
        Ok(manifest)
    })();
    if let Err(e) = &result {
        let marker = out.join(INCOMPLETE_MARKER);
        let _ = fs::write(&marker, format!("{e}\n"));
    }
    result
}

/// Template cells → CIFs → graphs with scattering → dataset directory.
pub fn gen3k(cfg: &PipelineConfig, config_text: &str) -> Result<GenReport, PipelineError> {
    cfg.validate()?;
    let table = ElementTable::builtin();
    let templates = cfg.load_templates(table)?;
    let policy = cfg.load_policy()?;
    ensure_fresh(&cfg.out)?;
    let cells = generate_cells(&templates, &policy, table)?;
    let cifs = write_template_cifs(&cells, &cfg.out.join(CIF_DIR))?;
    let manifest = generate_from_cifs(&cifs, cfg, config_text, &cfg.out, table)?;
    Ok(GenReport { manifest, cifs })
}

/// Copies validated records from `records` into a dataset at `out` and
/// commits the manifest.
pub fn pack(records: &Path, out: &Path, info: &ManifestInfo) -> Result<DatasetManifest, PipelineError> {
    ensure_fresh(out)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(records)
        .map_err(io_err(records))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == dataset::RECORD_EXT))
        .collect();
    paths.sort();
    let mut summaries = Vec::with_capacity(paths.len());
    let mut sums = BTreeMap::new();
    for p in &paths {
        let g = dataset::read_record(p)?;
        if g.y.scattering.curves().iter().any(|c| c.values.is_empty()) {
            return Err(DatasetError::InvariantViolation(format!("{}: scattering not simulated", g.id)).into());
        }
        let sum = dataset::write_record(out, &g)?;
        sums.insert(g.id.clone(), sum);
        summaries.push(GraphSummary::from(&g));
    }
    let manifest = build_manifest(info, summaries, &sums)?;
    write_manifest(out, &manifest)?;
    Ok(manifest)
}
