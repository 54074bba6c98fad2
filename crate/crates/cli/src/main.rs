//! `chiliforge`: run the dataset pipeline end to end or one stage at a time.
//!
//! Exit codes: 0 success, 1 input error, 2 internal error.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chiliforge::cif::{clean_bytes, write_document, UnitCell};
use chiliforge::crystal::SpacegroupTable;
use chiliforge::dataset::{self, read_dataset_with, statistics, DatasetError, GraphSummary, GRAPH_DIR, RECORD_EXT};
use chiliforge::elements::ElementTable;
use chiliforge::nanogen::NanoparticleGraph;
use chiliforge::pipeline::{
    self, cut_graph, load_cell, prepare_cell, run_parallel, simulate_graph, PipelineConfig, PipelineError,
};
use chiliforge_cod::{curate, fetch_all, load_id_list, CodError, CurationReject, FetchJob, HttpTransport};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chiliforge", version, about = "Nanoparticle graph datasets from crystal structures")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Split seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cutout radii in Å, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Element policy: chili3k, chili100k or a file path.
    #[arg(long, global = true)]
    policy: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the template dataset: CIFs, graphs, scattering, manifest.
    Gen3k,
    /// Download CIFs listed in a csv of COD ids and apply the curation filters.
    FetchCod {
        /// Delimited text with one COD id per row.
        #[arg(long)]
        ids: PathBuf,
        #[arg(long, default_value = chiliforge_cod::DEFAULT_ENDPOINT)]
        endpoint: String,
        /// Concurrent requests.
        #[arg(long, default_value_t = 4)]
        parallel: usize,
        /// Attempts per id, first included.
        #[arg(long, default_value_t = 4)]
        attempts: u32,
    },
    /// Repair or reject CIFs; writes cleaned files and one report per input.
    Clean {
        #[arg(long)]
        input: PathBuf,
    },
    /// Cut nanoparticles from cleaned CIFs into unsimulated records.
    Cut {
        #[arg(long)]
        input: PathBuf,
    },
    /// Add scattering to records, or cut and simulate a single CIF.
    Simulate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Package simulated records into a dataset with splits and manifest.
    Pack {
        #[arg(long)]
        input: PathBuf,
    },
    /// Print summary statistics of a dataset.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Render histograms and scattering curves as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        /// Graph ids whose curves to draw; the first record when omitted.
        #[arg(long = "graph")]
        graphs: Vec<String>,
    },
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<CodError> for Failure {
    fn from(e: CodError) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn input<E: std::fmt::Display>(ctx: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", ctx.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(2)
        }
    }
}

/// Config file (or defaults) with command-line overrides applied; also
/// returns the file text for the manifest.
fn load_config(c: &Common) -> Result<(PipelineConfig, String), Failure> {
    let text = match &c.config {
        Some(p) => fs::read_to_string(p).map_err(input(p))?,
        None => String::new(),
    };
    let mut cfg = PipelineConfig::from_toml(&text)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = &c.radii {
        cfg.radii = r.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(p) = &c.policy {
        cfg.policy = p.clone();
    }
    cfg.validate()?;
    Ok((cfg, text))
}

fn run(cli: Cli) -> Outcome {
    let (cfg, text) = load_config(&cli.common)?;
    match cli.command {
        Command::Gen3k => gen3k(&cfg, &text),
        Command::FetchCod { ids, endpoint, parallel, attempts } => fetch_cod(&cfg, &ids, endpoint, parallel, attempts),
        Command::Clean { input } => clean(&input, &cfg.out),
        Command::Cut { input } => cut(&input, &cfg),
        Command::Simulate { input } => simulate(&input, &cfg),
        Command::Pack { input } => {
            let m = pipeline::pack(&records_dir(&input), &cfg.out, &cfg.manifest_info(&text))?;
            println!("packed {} graphs into {}", m.records.len(), cfg.out.display());
            Ok(())
        }
        Command::Stats { input, json } => stats(&input, json),
        Command::Plot { input, graphs } => plot_dataset(&input, &cfg.out, &graphs),
    }
}

fn gen3k(cfg: &PipelineConfig, text: &str) -> Outcome {
    let start = Instant::now();
    let report = pipeline::gen3k(cfg, text)?;
    let m = &report.manifest;
    println!(
        "{} CIFs, {} graphs ({} train / {} validation / {} test) in {:.1?} -> {}",
        report.cifs.len(),
        m.records.len(),
        m.splits.train.len(),
        m.splits.validation.len(),
        m.splits.test.len(),
        Duration::from_secs(start.elapsed().as_secs()),
        cfg.out.display()
    );
    Ok(())
}

fn cache_dir(cfg: &PipelineConfig) -> PathBuf {
    std::env::var_os("CHILIFORGE_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.out.join("cod-cache"))
}

fn fetch_cod(cfg: &PipelineConfig, ids: &Path, endpoint: String, parallel: usize, attempts: u32) -> Outcome {
    let ids = load_id_list(&fs::read(ids).map_err(input(ids))?)?;
    let policy = cfg.load_policy()?;
    let mut job = FetchJob::new(cache_dir(cfg));
    job.endpoint = endpoint;
    job.parallel = parallel;
    job.retry.max_attempts = attempts;
    let transport = HttpTransport::new(Duration::from_secs(60)).map_err(Failure::Internal)?;
    let accept = |id: u64, bytes: &[u8]| -> Result<(), CurationReject> {
        let cell = load_cell(bytes, &id.to_string(), SpacegroupTable::builtin())
            .map_err(|e| CurationReject::Unreadable(e.to_string()))?;
        curate(&cell, &policy)
    };
    let ledger = fetch_all(&ids, &job, &transport, &accept)?;
    fs::create_dir_all(&cfg.out).map_err(input(&cfg.out))?;
    let path = cfg.out.join("ledger.tsv");
    fs::write(&path, ledger.to_tsv()).map_err(input(&path))?;
    let kept: Vec<String> = ledger
        .entries
        .iter()
        .filter(|(_, o)| matches!(o, chiliforge_cod::Outcome::Fetched | chiliforge_cod::Outcome::Cached))
        .map(|(id, _)| format!("{id}\n"))
        .collect();
    let accepted = cfg.out.join("accepted.txt");
    fs::write(&accepted, kept.concat()).map_err(input(&accepted))?;
    println!(
        "{} ids: {} accepted, ledger {}",
        ids.len(),
        kept.len(),
        path.display()
    );
    Ok(())
}

fn cif_files(input: &Path) -> Result<Vec<PathBuf>, Failure> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut v: Vec<PathBuf> = fs::read_dir(input)
        .map_err(self::input(input))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("cif")))
        .collect();
    v.sort();
    Ok(v)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn clean(input: &Path, out: &Path) -> Outcome {
    let files = cif_files(input)?;
    let reports = out.join("reports");
    fs::create_dir_all(&reports).map_err(self::input(&reports))?;
    let (mut kept, mut rejected) = (0, 0);
    for f in &files {
        let id = stem(f);
        let bytes = fs::read(f).map_err(self::input(f))?;
        let (doc, report) = clean_bytes(&bytes, &id);
        let rp = reports.join(format!("{id}.txt"));
        fs::write(&rp, report.to_text()).map_err(self::input(&rp))?;
        match doc {
            Some(doc) if !report.rejected => {
                let cp = out.join(format!("{id}.cif"));
                fs::write(&cp, write_document(&doc)).map_err(self::input(&cp))?;
                kept += 1;
            }
            _ => {
                log::warn!("{id}: rejected ({})", report.detail);
                rejected += 1;
            }
        }
    }
    println!("{kept} cleaned, {rejected} rejected -> {}", out.display());
    Ok(())
}

fn prepared_graphs(
    path: &Path,
    cfg: &PipelineConfig,
    table: &ElementTable,
) -> Result<(UnitCell, Vec<NanoparticleGraph>), PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    let cell = load_cell(&bytes, &stem(path), SpacegroupTable::builtin())?;
    let max_r = cfg.radii.iter().copied().fold(0.0, f64::max);
    let prepared = prepare_cell(&cell, max_r, table, cfg.replication_cap)?;
    let graphs = cfg
        .radii
        .iter()
        .map(|&r| cut_graph(&prepared, r, table))
        .collect::<Result<_, _>>()?;
    Ok((cell, graphs))
}

fn cut(input: &Path, cfg: &PipelineConfig) -> Outcome {
    let table = ElementTable::builtin();
    let files = cif_files(input)?;
    let counts = run_parallel(cfg.workers, &files, |p| {
        let (_, graphs) = prepared_graphs(p, cfg, table)?;
        for g in &graphs {
            dataset::write_record(&cfg.out, g)?;
        }
        Ok(graphs.len())
    })?;
    println!(
        "{} records from {} CIFs -> {}",
        counts.iter().sum::<usize>(),
        files.len(),
        cfg.out.join(GRAPH_DIR).display()
    );
    Ok(())
}

/// A dataset or stage directory holds records under `graphs/`; a bare
/// directory of records is accepted as is.
fn records_dir(input: &Path) -> PathBuf {
    let nested = input.join(GRAPH_DIR);
    if nested.is_dir() {
        nested
    } else {
        input.to_path_buf()
    }
}

fn record_files(input: &Path) -> Result<Vec<PathBuf>, Failure> {
    let dir = records_dir(input);
    let mut v: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(self::input(&dir))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == RECORD_EXT))
        .collect();
    v.sort();
    Ok(v)
}

fn write_curves(out: &Path, g: &NanoparticleGraph) -> Outcome {
    let dir = out.join("curves").join(&g.id);
    fs::create_dir_all(&dir).map_err(input(&dir))?;
    for c in g.y.scattering.curves() {
        let axis = if c.kind.is_pdf() { "r" } else { "q" };
        let mut s = format!("{axis},{}\n", c.kind.name());
        for (x, y) in c.grid.iter().zip(&c.values) {
            s.push_str(&format!("{x},{y:e}\n"));
        }
        let p = dir.join(format!("{}.csv", c.kind.name()));
        fs::write(&p, s).map_err(input(&p))?;
    }
    Ok(())
}

fn simulate(input: &Path, cfg: &PipelineConfig) -> Outcome {
    let table = ElementTable::builtin();
    let is_cif = input.is_file() && input.extension().is_some_and(|x| x.eq_ignore_ascii_case("cif"));
    let sources: Vec<PathBuf> = if is_cif { vec![input.to_path_buf()] } else { record_files(input)? };
    let done = run_parallel(cfg.workers, &sources, |p| {
        let graphs = if is_cif {
            prepared_graphs(p, cfg, table)?.1
        } else {
            vec![dataset::read_record(p)?]
        };
        let mut n = 0;
        for mut g in graphs {
            simulate_graph(&mut g, &cfg.debye, table)?;
            dataset::write_record(&cfg.out, &g)?;
            write_curves(&cfg.out, &g).map_err(|f| match f {
                Failure::Input(m) | Failure::Internal(m) => PipelineError::Config(m),
            })?;
            n += 1;
        }
        Ok(n)
    })?;
    println!("{} graphs simulated -> {}", done.iter().sum::<usize>(), cfg.out.display());
    Ok(())
}

/// Summaries of a packaged dataset, or of loose records when there is no
/// manifest.
fn summaries(input: &Path) -> Result<Vec<GraphSummary>, Failure> {
    if input.join(dataset::MANIFEST_FILE).exists() {
        let mut v = Vec::new();
        read_dataset_with(input, |g| {
            v.push(GraphSummary::from(&g));
            Ok(())
        })?;
        return Ok(v);
    }
    let files = if input.is_dir() { record_files(input)? } else { Vec::new() };
    files
        .iter()
        .map(|p| Ok(GraphSummary::from(&dataset::read_record(p)?)))
        .collect()
}

fn stats(input: &Path, json: bool) -> Outcome {
    let s = statistics(&summaries(input)?, 5.0)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&s).map_err(|e| Failure::Internal(e.to_string()))?);
    } else {
        print!("{}", s.to_text());
    }
    Ok(())
}

fn plot_dataset(input: &Path, out: &Path, ids: &[String]) -> Outcome {
    let sums = summaries(input)?;
    let s = statistics(&sums, 5.0)?;
    fs::create_dir_all(out).map_err(self::input(out))?;
    let mut written = plot::histograms(&s, out).map_err(Failure::Internal)?;
    let wanted: Vec<String> = if ids.is_empty() {
        let mut v: Vec<&String> = sums.iter().map(|s| &s.id).collect();
        v.sort();
        v.into_iter().take(1).cloned().collect()
    } else {
        ids.to_vec()
    };
    let dir = records_dir(input);
    for id in &wanted {
        let p = dir.join(format!("{id}.{RECORD_EXT}"));
        let g = dataset::read_record(&p)?;
        written.push(plot::curves(&g, out).map_err(Failure::Internal)?);
    }
    for w in &written {
        println!("{}", w.display());
    }
    Ok(())
}
