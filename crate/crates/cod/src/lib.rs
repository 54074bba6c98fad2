//! Fetching CIFs from the Crystallography Open Database by id, with an
//! on-disk cache, retry with exponential backoff, and the curation filters
//! applied before structures enter a dataset.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use chiliforge::cif::{cell_volume, UnitCell};
use chiliforge::elements::{ElementPolicy, ElementTable};
use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_ENDPOINT: &str = "https://www.crystallography.net/cod";
/// Structures at or above this volume (Å³) are filtered out.
pub const MAX_CELL_VOLUME: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum CodError {
    #[error("row {0}: expected a numeric id in the first column")]
    MalformedRow(usize),
    #[error("id {0} not found")]
    NotFound(u64),
    #[error("id {id}: {msg}")]
    TransportError { id: u64, msg: String },
    #[error("id {id}: HTTP {status}")]
    Http { id: u64, status: u16 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Ordered, deduplicated ids from the first column of delimited text.
/// Blank lines are skipped; rows are numbered from 1.
pub fn load_id_list(bytes: &[u8]) -> Result<Vec<u64>, CodError> {
    let text = String::from_utf8_lossy(bytes);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let first = line
            .split([',', '\t', ';'])
            .next()
            .unwrap_or("")
            .trim()
            .trim_matches('"');
        let id: u64 = first.parse().map_err(|_| CodError::MalformedRow(k + 1))?;
        if seen.insert(id) {
            out.push(id);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            backoff_base: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.backoff_base.saturating_mul(1u32 << retry.saturating_sub(1).min(16))
    }
}

#[derive(Debug, Clone)]
pub struct FetchJob {
    pub endpoint: String,
    pub cache_dir: PathBuf,
    pub retry: RetryPolicy,
    /// Concurrent requests.
    pub parallel: usize,
    /// Pause before each network request, per worker.
    pub politeness: Duration,
}

impl FetchJob {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            cache_dir: cache_dir.into(),
            retry: RetryPolicy::default(),
            parallel: 4,
            politeness: Duration::from_millis(250),
        }
    }

    pub fn cache_path(&self, id: u64) -> PathBuf {
        self.cache_dir.join(format!("{id}.cif"))
    }

    pub fn url(&self, id: u64) -> String {
        format!("{}/{id}.cif", self.endpoint.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: Vec<u8>,
}

/// One HTTP GET. `Err` means no response arrived (connection, timeout).
pub trait Transport: Sync {
    fn get(&self, url: &str) -> Result<Response, String>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("chiliforge/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Response, String> {
        let resp = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.bytes().map_err(|e| e.to_string())?.to_vec();
        Ok(Response { status, body })
    }
}

/// Terminal state of one id.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Fetched,
    Cached,
    HttpError(u16),
    TransportError(String),
    FilteredOut(CurationReject),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Fetched => f.write_str("fetched"),
            Outcome::Cached => f.write_str("cached"),
            Outcome::HttpError(s) => write!(f, "http-error\t{s}"),
            Outcome::TransportError(m) => write!(f, "transport-error\t{}", m.replace(['\t', '\n'], " ")),
            Outcome::FilteredOut(r) => write!(f, "filtered-out\t{r}"),
        }
    }
}

fn write_cache(path: &Path, bytes: &[u8]) -> Result<(), CodError> {
    let io_err = |source| CodError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let tmp = path.with_extension("cif.partial");
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

/// Cached bytes when present; otherwise GET with retries on 5xx and
/// transport failures, then store the raw bytes in the cache.
pub fn fetch(id: u64, job: &FetchJob, transport: &dyn Transport) -> Result<(Vec<u8>, Outcome), CodError> {
    let path = job.cache_path(id);
    if let Ok(bytes) = fs::read(&path) {
        return Ok((bytes, Outcome::Cached));
    }
    let url = job.url(id);
    let attempts = job.retry.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            thread::sleep(job.retry.delay(attempt));
        }
        if !job.politeness.is_zero() {
            thread::sleep(job.politeness);
        }
        match transport.get(&url) {
            Ok(r) if (200..300).contains(&r.status) => {
                write_cache(&path, &r.body)?;
                return Ok((r.body, Outcome::Fetched));
            }
            Ok(r) if r.status == 404 => return Err(CodError::NotFound(id)),
            Ok(r) if r.status >= 500 => {
                log::warn!("{url}: HTTP {} (attempt {})", r.status, attempt + 1);
                last = format!("HTTP {}", r.status);
            }
            Ok(r) => return Err(CodError::Http { id, status: r.status }),
            Err(e) => {
                log::warn!("{url}: {e} (attempt {})", attempt + 1);
                last = e;
            }
        }
    }
    Err(CodError::TransportError { id, msg: format!("{attempts} attempts, last: {last}") })
}

/// One outcome per input id, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub entries: Vec<(u64, Outcome)>,
}

impl Ledger {
    /// `id TAB outcome [TAB detail]` per line.
    pub fn to_tsv(&self) -> String {
        self.entries.iter().map(|(id, o)| format!("{id}\t{o}\n")).collect()
    }

    pub fn count(&self, pred: impl Fn(&Outcome) -> bool) -> usize {
        self.entries.iter().filter(|(_, o)| pred(o)).count()
    }
}

/// Fetches every id with at most `job.parallel` requests in flight.
/// `accept` sees the bytes of each available id and may filter it out.
pub fn fetch_all(
    ids: &[u64],
    job: &FetchJob,
    transport: &dyn Transport,
    accept: &(dyn Fn(u64, &[u8]) -> Result<(), CurationReject> + Sync),
) -> Result<Ledger, CodError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.parallel.max(1))
        .build()
        .map_err(|e| CodError::TransportError { id: 0, msg: e.to_string() })?;
    let results: Vec<Result<(u64, Outcome), CodError>> = pool.install(|| {
        ids.par_iter()
            .map(|&id| {
                let outcome = match fetch(id, job, transport) {
                    Ok((bytes, o)) => match accept(id, &bytes) {
                        Ok(()) => o,
                        Err(r) => Outcome::FilteredOut(r),
                    },
                    Err(CodError::NotFound(_)) => Outcome::HttpError(404),
                    Err(CodError::Http { status, .. }) => Outcome::HttpError(status),
                    Err(CodError::TransportError { msg, .. }) => Outcome::TransportError(msg),
                    Err(e) => return Err(e),
                };
                Ok((id, outcome))
            })
            .collect()
    });
    Ok(Ledger { entries: results.into_iter().collect::<Result<_, _>>()? })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurationReject {
    DisallowedElement(String),
    VolumeTooLarge(f64),
    NoMetal,
    /// The file could not be read as a unit cell.
    Unreadable(String),
}

impl fmt::Display for CurationReject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurationReject::DisallowedElement(e) => write!(f, "DisallowedElement\t{e}"),
            CurationReject::VolumeTooLarge(v) => write!(f, "VolumeTooLarge\t{v:.3}"),
            CurationReject::NoMetal => f.write_str("NoMetal"),
            CurationReject::Unreadable(m) => write!(f, "Unreadable\t{}", m.replace(['\t', '\n'], " ")),
        }
    }
}

/// Accepts when every element is in the policy, the cell volume is below
/// 1000 Å³ and at least one metal is present.
pub fn curate(cell: &UnitCell, policy: &ElementPolicy) -> Result<(), CurationReject> {
    let table = ElementTable::builtin();
    let mut has_metal = false;
    for s in &cell.sites {
        if !policy.is_allowed(&s.element) {
            return Err(CurationReject::DisallowedElement(s.element.clone()));
        }
        has_metal |= table.lookup(s.element.as_str()).is_ok_and(|e| e.is_metal);
    }
    let v = cell_volume(cell);
    if !(v < MAX_CELL_VOLUME) {
        return Err(CurationReject::VolumeTooLarge(v));
    }
    if !has_metal {
        return Err(CurationReject::NoMetal);
    }
    Ok(())
}
