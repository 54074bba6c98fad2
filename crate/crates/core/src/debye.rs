//! Scattering simulation from finite atom lists.
//!
//! Intensities follow the Debye scattering equation. Pair distances are
//! histogrammed per species pair into bins of width [`BIN_WIDTH`]; each bin
//! keeps its count and the first two moments of the distances it holds, and
//! the sinc kernel is expanded to second order about the bin mean. The same
//! histogram serves every Q grid and both radiations.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::{ElementError, ElementRecord};

/// Width of the pair-distance histogram bins (Å).
pub const BIN_WIDTH: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DebyeError {
    #[error(transparent)]
    MissingScatteringData(#[from] ElementError),
    #[error("intensity grid does not match the configured Q grid")]
    GridMismatch,
    #[error("constant signal cannot be min-max normalized")]
    ConstantSignal,
    #[error("no atoms to scatter from")]
    Empty,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Radiation {
    Xray,
    Neutron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CurveKind {
    #[serde(rename = "saxs")]
    Saxs,
    #[serde(rename = "sans")]
    Sans,
    #[serde(rename = "xrd")]
    Xrd,
    #[serde(rename = "nd")]
    Nd,
    #[serde(rename = "xPDF")]
    Xpdf,
    #[serde(rename = "nPDF")]
    Npdf,
}

impl CurveKind {
    pub const ALL: [CurveKind; 6] = [
        CurveKind::Saxs,
        CurveKind::Sans,
        CurveKind::Xrd,
        CurveKind::Nd,
        CurveKind::Xpdf,
        CurveKind::Npdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Saxs => "saxs",
            CurveKind::Sans => "sans",
            CurveKind::Xrd => "xrd",
            CurveKind::Nd => "nd",
            CurveKind::Xpdf => "xPDF",
            CurveKind::Npdf => "nPDF",
        }
    }

    pub fn radiation(self) -> Radiation {
        match self {
            CurveKind::Saxs | CurveKind::Xrd | CurveKind::Xpdf => Radiation::Xray,
            _ => Radiation::Neutron,
        }
    }

    pub fn is_pdf(self) -> bool {
        matches!(self, CurveKind::Xpdf | CurveKind::Npdf)
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid and thermal parameters for one family of signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebyeParams {
    pub qmin: f64,
    pub qmax: f64,
    pub qstep: f64,
    pub biso: f64,
    pub rmin: f64,
    pub rmax: f64,
    pub rstep: f64,
}

impl DebyeParams {
    /// saxs/sans defaults.
    pub const SMALL_ANGLE: DebyeParams = DebyeParams {
        qmin: 0.0,
        qmax: 3.0,
        qstep: 0.01,
        biso: 0.3,
        rmin: 0.0,
        rmax: 60.0,
        rstep: 0.01,
    };

    /// xrd/nd and PDF defaults.
    pub const WIDE_ANGLE: DebyeParams = DebyeParams {
        qmin: 1.0,
        qmax: 30.0,
        qstep: 0.05,
        biso: 0.3,
        rmin: 0.0,
        rmax: 60.0,
        rstep: 0.01,
    };

    pub fn validate(&self, with_pdf: bool) -> Result<(), DebyeError> {
        let ok_q = self.qmin >= 0.0 && self.qmin < self.qmax && self.qstep > 0.0;
        let ok_r = !with_pdf || (self.rmin < self.rmax && self.rstep > 0.0);
        if !ok_q || !ok_r || self.biso < 0.0 || !self.biso.is_finite() {
            return Err(DebyeError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn q_grid(&self) -> Vec<f64> {
        q_grid(self.qmin, self.qmax, self.qstep)
    }

    pub fn r_grid(&self) -> Vec<f64> {
        q_grid(self.rmin, self.rmax, self.rstep)
    }
}

/// Parameter sets for all six signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DebyeConfig {
    pub small_angle: DebyeParams,
    pub wide_angle: DebyeParams,
}

impl Default for DebyeConfig {
    fn default() -> Self {
        Self {
            small_angle: DebyeParams::SMALL_ANGLE,
            wide_angle: DebyeParams::WIDE_ANGLE,
        }
    }
}

/// Half-open uniform grid `lo + k·step` for `k < floor((hi - lo)/step)`.
pub fn q_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if step <= 0.0 || hi <= lo {
        return Vec::new();
    }
    // Tolerates representation error in the ratio, e.g. 29/0.05.
    let n = ((hi - lo) / step * (1.0 + 1e-12)).floor() as usize;
    (0..n).map(|k| lo + k as f64 * step).collect()
}

pub fn amplitude(element: &ElementRecord, q: f64, radiation: Radiation) -> Result<f64, ElementError> {
    match radiation {
        Radiation::Xray => element.xray_form_factor(q),
        Radiation::Neutron => element.neutron_amplitude(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCurve {
    pub kind: CurveKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// How pair sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumMode {
    #[default]
    Binned,
    /// Direct double sum; O(N²·N_Q), for validation.
    Exact,
}

/// Atoms grouped by species.
struct Composition<'a> {
    species: Vec<&'a ElementRecord>,
    kind: Vec<usize>,
    counts: Vec<f64>,
}

impl<'a> Composition<'a> {
    fn new(elements: &[&'a ElementRecord]) -> Self {
        let mut species: Vec<&ElementRecord> = Vec::new();
        let mut kind = Vec::with_capacity(elements.len());
        for e in elements {
            let k = match species.iter().position(|s| s.symbol == e.symbol) {
                Some(k) => k,
                None => {
                    species.push(e);
                    species.len() - 1
                }
            };
            kind.push(k);
        }
        let mut counts = vec![0.0; species.len()];
        for &k in &kind {
            counts[k] += 1.0;
        }
        Self { species, kind, counts }
    }

    fn n_pairs(&self) -> usize {
        let s = self.species.len();
        s * (s + 1) / 2
    }

    fn amplitudes(&self, q: f64, radiation: Radiation) -> Result<Vec<f64>, ElementError> {
        self.species.iter().map(|e| amplitude(e, q, radiation)).collect()
    }
}

fn pair_slot(a: usize, b: usize, n: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n - a * (a + 1) / 2 + b
}

/// Per-species-pair distance moments for one histogram bin layout.
struct PairHistogram {
    /// Per pair slot: (bin mean, A+C, B, D) coefficients of the occupied bins.
    slots: Vec<BinCoeffs>,
}

#[derive(Default)]
struct BinCoeffs {
    r: Vec<f64>,
    /// n/r + n·σ²/r³
    ac: Vec<f64>,
    /// n·σ²/(2r)
    b: Vec<f64>,
    /// -n·σ²/r²
    d: Vec<f64>,
    /// Pairs in occupied bins.
    binned: f64,
    /// Pairs at zero separation; sinc is 1 at every Q.
    coincident: f64,
}

impl PairHistogram {
    fn build(positions: &[[f64; 3]], comp: &Composition) -> Self {
        let ns = comp.species.len();
        let mut dmax2: f64 = 0.0;
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in positions {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        for k in 0..3 {
            dmax2 += (hi[k] - lo[k]).powi(2);
        }
        let nbins = (dmax2.sqrt() / BIN_WIDTH) as usize + 2;
        // count, Σδ, Σδ² with δ the offset from the bin's lower edge.
        let mut moments: Vec<Vec<[f64; 3]>> = vec![Vec::new(); comp.n_pairs()];
        for i in 0..positions.len() {
            let pi = positions[i];
            let ki = comp.kind[i];
            for j in (i + 1)..positions.len() {
                let pj = positions[j];
                let dx = pi[0] - pj[0];
                let dy = pi[1] - pj[1];
                let dz = pi[2] - pj[2];
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                let bin = (r / BIN_WIDTH) as usize;
                let delta = r - bin as f64 * BIN_WIDTH;
                let hist = &mut moments[pair_slot(ki, comp.kind[j], ns)];
                if hist.is_empty() {
                    hist.resize(nbins, [0.0; 3]);
                }
                let m = &mut hist[bin.min(nbins - 1)];
                m[0] += 1.0;
                m[1] += delta;
                m[2] += delta * delta;
            }
        }
        let slots = moments
            .into_iter()
            .map(|hist| {
                let mut c = BinCoeffs::default();
                for (bin, m) in hist.iter().enumerate() {
                    let n = m[0];
                    if n == 0.0 {
                        continue;
                    }
                    let mean = m[1] / n;
                    let var = (m[2] / n - mean * mean).max(0.0);
                    let r = bin as f64 * BIN_WIDTH + mean;
                    if r == 0.0 {
                        c.coincident += n;
                        continue;
                    }
                    c.r.push(r);
                    c.ac.push(n / r + n * var / (r * r * r));
                    c.b.push(n * var / (2.0 * r));
                    c.d.push(-n * var / (r * r));
                    c.binned += n;
                }
                c
            })
            .collect();
        Self { slots }
    }

    /// `Σ_pairs sinc(Q r)` per pair slot on `grid` (uniform with spacing `step`).
    fn pair_sums(&self, grid: &[f64], step: f64) -> Vec<Vec<f64>> {
        self.slots.iter().map(|c| binned_sum(c, grid, step)).collect()
    }
}

const LANES: usize = 8;

fn binned_sum(c: &BinCoeffs, grid: &[f64], step: f64) -> Vec<f64> {
    let nb = c.r.len();
    let Some(&q0) = grid.first() else {
        return Vec::new();
    };
    let mut s: Vec<f64> = c.r.iter().map(|r| (q0 * r).sin()).collect();
    let mut co: Vec<f64> = c.r.iter().map(|r| (q0 * r).cos()).collect();
    let rot_s: Vec<f64> = c.r.iter().map(|r| (step * r).sin()).collect();
    let rot_c: Vec<f64> = c.r.iter().map(|r| (step * r).cos()).collect();
    let mut out = Vec::with_capacity(grid.len());
    for (k, &q) in grid.iter().enumerate() {
        if k > 0 && k % 64 == 0 {
            // Re-seed to bound drift of the rotation recurrence.
            for b in 0..nb {
                let x = q * c.r[b];
                s[b] = x.sin();
                co[b] = x.cos();
            }
        }
        let mut a1 = [0.0; LANES];
        let mut a2 = [0.0; LANES];
        let mut a3 = [0.0; LANES];
        let chunks = nb / LANES * LANES;
        let mut b = 0;
        while b < chunks {
            for l in 0..LANES {
                let i = b + l;
                let (si, ci) = (s[i], co[i]);
                a1[l] += si * c.ac[i];
                a2[l] += si * c.b[i];
                a3[l] += ci * c.d[i];
                s[i] = si * rot_c[i] + ci * rot_s[i];
                co[i] = ci * rot_c[i] - si * rot_s[i];
            }
            b += LANES;
        }
        for i in chunks..nb {
            let (si, ci) = (s[i], co[i]);
            a1[i - chunks] += si * c.ac[i];
            a2[i - chunks] += si * c.b[i];
            a3[i - chunks] += ci * c.d[i];
            s[i] = si * rot_c[i] + ci * rot_s[i];
            co[i] = ci * rot_c[i] - si * rot_s[i];
        }
        let (s1, s2, s3) = (a1.iter().sum::<f64>(), a2.iter().sum::<f64>(), a3.iter().sum::<f64>());
        let v = if q == 0.0 { c.binned } else { s1 / q - q * s2 + s3 };
        out.push(v + c.coincident);
    }
    out
}

fn exact_pair_sums(positions: &[[f64; 3]], comp: &Composition, grid: &[f64]) -> Vec<Vec<f64>> {
    let ns = comp.species.len();
    let mut sums = vec![vec![0.0; grid.len()]; comp.n_pairs()];
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let r = dist(positions[i], positions[j]);
            let slot = &mut sums[pair_slot(comp.kind[i], comp.kind[j], ns)];
            for (v, &q) in slot.iter_mut().zip(grid) {
                let x = q * r;
                *v += if x == 0.0 { 1.0 } else { x.sin() / x };
            }
        }
    }
    sums
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn combine(
    comp: &Composition,
    sums: &[Vec<f64>],
    grid: &[f64],
    biso: f64,
    radiation: Radiation,
) -> Result<Vec<f64>, DebyeError> {
    let ns = comp.species.len();
    grid.iter()
        .enumerate()
        .map(|(k, &q)| {
            let f = comp.amplitudes(q, radiation)?;
            let dw = (-biso * q * q / (8.0 * PI * PI)).exp();
            let mut self_term = 0.0;
            let mut cross = 0.0;
            for a in 0..ns {
                self_term += comp.counts[a] * f[a] * f[a];
                for b in a..ns {
                    cross += f[a] * f[b] * sums[pair_slot(a, b, ns)][k];
                }
            }
            Ok(self_term + 2.0 * cross * dw)
        })
        .collect()
}

/// Debye intensity `I(Q)` on the grid of `params`.
pub fn debye_intensity(
    positions: &[[f64; 3]],
    elements: &[&ElementRecord],
    params: &DebyeParams,
    radiation: Radiation,
    mode: SumMode,
) -> Result<Vec<f64>, DebyeError> {
    if positions.is_empty() || positions.len() != elements.len() {
        return Err(DebyeError::Empty);
    }
    params.validate(false)?;
    let comp = Composition::new(elements);
    let grid = params.q_grid();
    let sums = match mode {
        SumMode::Binned => PairHistogram::build(positions, &comp).pair_sums(&grid, params.qstep),
        SumMode::Exact => exact_pair_sums(positions, &comp, &grid),
    };
    combine(&comp, &sums, &grid, params.biso, radiation)
}

/// Sine transform of the reduced structure function.
///
/// `S(Q) = I(Q) / (N·⟨f⟩²)`, `F(Q) = Q·(S(Q) − 1)`,
/// `G(r) = (2/π)·Σ_Q F(Q)·sin(Q r)·Δq`.
pub fn reduce_pdf(
    iq: &ScatteringCurve,
    elements: &[&ElementRecord],
    params: &DebyeParams,
) -> Result<ScatteringCurve, DebyeError> {
    params.validate(true)?;
    let grid = params.q_grid();
    let same = iq.grid.len() == grid.len()
        && iq.values.len() == grid.len()
        && iq.grid.iter().zip(&grid).all(|(a, b)| (a - b).abs() <= 1e-9);
    if !same {
        return Err(DebyeError::GridMismatch);
    }
    if elements.is_empty() {
        return Err(DebyeError::Empty);
    }
    let (kind, radiation) = match iq.kind {
        CurveKind::Xrd | CurveKind::Saxs | CurveKind::Xpdf => (CurveKind::Xpdf, Radiation::Xray),
        _ => (CurveKind::Npdf, Radiation::Neutron),
    };
    let comp = Composition::new(elements);
    let n = elements.len() as f64;
    let fq: Vec<f64> = grid
        .iter()
        .zip(&iq.values)
        .map(|(&q, &i)| {
            let f = comp.amplitudes(q, radiation)?;
            let mean: f64 = f.iter().zip(&comp.counts).map(|(f, c)| f * c).sum::<f64>() / n;
            Ok(q * (i / (n * mean * mean) - 1.0))
        })
        .collect::<Result<_, ElementError>>()?;
    let rgrid = params.r_grid();
    Ok(ScatteringCurve {
        kind,
        values: sine_transform(&grid, &fq, &rgrid, params.qstep, params.rstep),
        grid: rgrid,
    })
}

fn sine_transform(q: &[f64], fq: &[f64], r: &[f64], qstep: f64, rstep: f64) -> Vec<f64> {
    let nq = q.len();
    let Some(&r0) = r.first() else {
        return Vec::new();
    };
    let weight = 2.0 / PI * qstep;
    let mut s: Vec<f64> = q.iter().map(|q| (q * r0).sin()).collect();
    let mut c: Vec<f64> = q.iter().map(|q| (q * r0).cos()).collect();
    let rot_s: Vec<f64> = q.iter().map(|q| (q * rstep).sin()).collect();
    let rot_c: Vec<f64> = q.iter().map(|q| (q * rstep).cos()).collect();
    let mut out = Vec::with_capacity(r.len());
    for (j, &rj) in r.iter().enumerate() {
        if j > 0 && j % 64 == 0 {
            for k in 0..nq {
                s[k] = (q[k] * rj).sin();
                c[k] = (q[k] * rj).cos();
            }
        }
        let mut acc = [0.0; LANES];
        for k in 0..nq {
            let (sk, ck) = (s[k], c[k]);
            acc[k % LANES] += fq[k] * sk;
            s[k] = sk * rot_c[k] + ck * rot_s[k];
            c[k] = ck * rot_c[k] - sk * rot_s[k];
        }
        out.push(weight * acc.iter().sum::<f64>());
    }
    out
}

/// The six signals of one particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSet {
    pub saxs: ScatteringCurve,
    pub sans: ScatteringCurve,
    pub xrd: ScatteringCurve,
    pub nd: ScatteringCurve,
    pub xpdf: ScatteringCurve,
    pub npdf: ScatteringCurve,
}

impl ScatteringSet {
    /// Six zero-length curves; a placeholder before simulation.
    pub fn empty() -> Self {
        let c = |kind| ScatteringCurve {
            kind,
            grid: Vec::new(),
            values: Vec::new(),
        };
        Self {
            saxs: c(CurveKind::Saxs),
            sans: c(CurveKind::Sans),
            xrd: c(CurveKind::Xrd),
            nd: c(CurveKind::Nd),
            xpdf: c(CurveKind::Xpdf),
            npdf: c(CurveKind::Npdf),
        }
    }

    pub fn curves(&self) -> [&ScatteringCurve; 6] {
        [&self.saxs, &self.sans, &self.xrd, &self.nd, &self.xpdf, &self.npdf]
    }

    pub fn get(&self, kind: CurveKind) -> &ScatteringCurve {
        match kind {
            CurveKind::Saxs => &self.saxs,
            CurveKind::Sans => &self.sans,
            CurveKind::Xrd => &self.xrd,
            CurveKind::Nd => &self.nd,
            CurveKind::Xpdf => &self.xpdf,
            CurveKind::Npdf => &self.npdf,
        }
    }
}

/// All six signals, sharing one distance histogram.
pub fn simulate_all(
    positions: &[[f64; 3]],
    elements: &[&ElementRecord],
    config: &DebyeConfig,
    mode: SumMode,
) -> Result<ScatteringSet, DebyeError> {
    if positions.is_empty() || positions.len() != elements.len() {
        return Err(DebyeError::Empty);
    }
    let (sa, wa) = (&config.small_angle, &config.wide_angle);
    sa.validate(false)?;
    wa.validate(true)?;
    let comp = Composition::new(elements);
    let (g_sa, g_wa) = (sa.q_grid(), wa.q_grid());
    let (sums_sa, sums_wa) = match mode {
        SumMode::Binned => {
            let h = PairHistogram::build(positions, &comp);
            (h.pair_sums(&g_sa, sa.qstep), h.pair_sums(&g_wa, wa.qstep))
        }
        SumMode::Exact => (
            exact_pair_sums(positions, &comp, &g_sa),
            exact_pair_sums(positions, &comp, &g_wa),
        ),
    };
    let curve = |kind: CurveKind, grid: &[f64], sums: &[Vec<f64>], p: &DebyeParams| {
        Ok::<_, DebyeError>(ScatteringCurve {
            kind,
            grid: grid.to_vec(),
            values: combine(&comp, sums, grid, p.biso, kind.radiation())?,
        })
    };
    let saxs = curve(CurveKind::Saxs, &g_sa, &sums_sa, sa)?;
    let sans = curve(CurveKind::Sans, &g_sa, &sums_sa, sa)?;
    let xrd = curve(CurveKind::Xrd, &g_wa, &sums_wa, wa)?;
    let nd = curve(CurveKind::Nd, &g_wa, &sums_wa, wa)?;
    let xpdf = reduce_pdf(&xrd, elements, wa)?;
    let npdf = reduce_pdf(&nd, elements, wa)?;
    Ok(ScatteringSet {
        saxs,
        sans,
        xrd,
        nd,
        xpdf,
        npdf,
    })
}

/// Maps values affinely onto [0, 1].
pub fn normalize_minmax(curve: &ScatteringCurve) -> Result<ScatteringCurve, DebyeError> {
    let lo = curve.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = curve.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(DebyeError::ConstantSignal);
    }
    Ok(ScatteringCurve {
        kind: curve.kind,
        grid: curve.grid.clone(),
        values: curve.values.iter().map(|v| (v - lo) / (hi - lo)).collect(),
    })
}
