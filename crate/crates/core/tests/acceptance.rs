//! One PASS/FAIL line per acceptance criterion. Runs two full dataset
//! generations, so expect several minutes on a single core.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chiliforge::cif::{clean, clean_bytes, parse, write_document};
use chiliforge::dataset::{read_dataset_with, split, statistics, stratified_subset, DatasetManifest, GRAPH_DIR};
use chiliforge::debye::{debye_intensity, reduce_pdf, CurveKind, DebyeParams, Radiation, ScatteringCurve, SumMode};
use chiliforge::elements::{ElementRecord, ElementTable};
use chiliforge::pipeline::{gen3k, PipelineConfig};
use common::geometry::{case_strategy, check_case};
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const RUNTIME_TARGET: Duration = Duration::from_secs(30 * 60);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.into()) }
}

struct Run {
    dir: PathBuf,
    manifest: DatasetManifest,
    elapsed: Duration,
}

fn generate(root: &Path, sub: &str, workers: usize) -> Result<Run, String> {
    let cfg = PipelineConfig { out: root.join(sub), workers, ..PipelineConfig::default() };
    let start = Instant::now();
    let report = gen3k(&cfg, "").map_err(|e| e.to_string())?;
    Ok(Run { dir: cfg.out, manifest: report.manifest, elapsed: start.elapsed() })
}

fn count(run: &Result<Run, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let cifs = fs::read_dir(run.dir.join("cifs")).map_err(|e| e.to_string())?.count();
    let graphs = run.manifest.records.len();
    ensure(cifs == 636 && graphs == 3180, format!("{cifs} CIFs, {graphs} graphs"))?;
    ensure(
        run.elapsed < RUNTIME_TARGET,
        format!("runtime {:.1}s exceeds {}s", run.elapsed.as_secs_f64(), RUNTIME_TARGET.as_secs()),
    )?;
    Ok(format!("636 CIFs x 5 radii = 3180 graphs in {:.1}s on one worker", run.elapsed.as_secs_f64()))
}

fn shapes(run: &Result<Run, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let want = [300, 300, 580, 580, 6000, 6000];
    let mut checked = 0;
    read_dataset_with(&run.dir, |g| {
        let got: Vec<usize> = g.y.scattering.curves().iter().map(|c| c.values.len()).collect();
        let grids: Vec<usize> = g.y.scattering.curves().iter().map(|c| c.grid.len()).collect();
        if got != want || grids != want {
            return Err(chiliforge::dataset::DatasetError::InvariantViolation(format!("{}: {got:?}", g.id)));
        }
        checked += 1;
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    ensure(checked == 3180, format!("{checked} graphs read"))?;
    Ok(format!("{checked} graphs with 300/300/580/580/6000/6000 points"))
}

fn unit_scatterer() -> ElementRecord {
    ElementRecord {
        symbol: "X".into(),
        atomic_number: 1,
        slater_radius: 1.0,
        atomic_weight: 1.0,
        electron_affinity: None,
        is_metal: true,
        neutron_length: Some(1.0),
        xray_ff_coeffs: None,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Direct double sum over ordered pairs with pairwise thermal damping.
fn double_sum(pos: &[[f64; 3]], els: &[&ElementRecord], q: f64, radiation: Radiation, biso: f64) -> f64 {
    let amp = |e: &ElementRecord| match radiation {
        Radiation::Xray => {
            let c = e.xray_ff_coeffs.unwrap();
            let s2 = (q / (4.0 * PI)).powi(2);
            (0..4).map(|i| c[2 * i] * (-c[2 * i + 1] * s2).exp()).sum::<f64>() + c[8]
        }
        Radiation::Neutron => e.neutron_length.unwrap(),
    };
    let dw = (-biso * q * q / (8.0 * PI * PI)).exp();
    let mut total = 0.0;
    for i in 0..pos.len() {
        for j in 0..pos.len() {
            let f = amp(els[i]) * amp(els[j]);
            if i == j {
                total += f;
                continue;
            }
            let r = (0..3).map(|k| (pos[i][k] - pos[j][k]).powi(2)).sum::<f64>().sqrt();
            total += f * (q * r).sin() / (q * r) * dw;
        }
    }
    total
}

fn debye_oracle() -> Outcome {
    let x = unit_scatterer();
    let p = DebyeParams { biso: 0.0, ..DebyeParams::WIDE_ANGLE };
    let d = 2.0;
    let got = debye_intensity(&[[0.0; 3], [0.0, 0.0, d]], &[&x, &x], &p, Radiation::Neutron, SumMode::Binned)
        .map_err(|e| e.to_string())?;
    let mut dimer_worst = 0f64;
    for (q, v) in p.q_grid().iter().zip(&got) {
        dimer_worst = dimer_worst.max(rel(*v, 2.0 * (1.0 + (q * d).sin() / (q * d))));
    }
    ensure(dimer_worst <= 1e-10, format!("dimer relative error {dimer_worst:e}"))?;

    let t = ElementTable::builtin();
    let species = [t.lookup("Zn").unwrap(), t.lookup("O").unwrap(), t.lookup("Ba").unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cloud_worst = 0f64;
    for n in [3usize, 50, 250, 500] {
        let pos: Vec<[f64; 3]> = (0..n).map(|_| [0, 1, 2].map(|_| rng.random_range(-15.0..15.0))).collect();
        let els: Vec<&ElementRecord> = (0..n).map(|_| species[rng.random_range(0..3)]).collect();
        for base in [DebyeParams::SMALL_ANGLE, DebyeParams::WIDE_ANGLE] {
            let grid = base.q_grid();
            for radiation in [Radiation::Xray, Radiation::Neutron] {
                let got = debye_intensity(&pos, &els, &base, radiation, SumMode::Binned).map_err(|e| e.to_string())?;
                for k in (0..grid.len()).step_by(17) {
                    let e = rel(got[k], double_sum(&pos, &els, grid[k], radiation, base.biso));
                    cloud_worst = cloud_worst.max(e);
                }
            }
        }
    }
    ensure(cloud_worst <= 1e-6, format!("random cloud relative error {cloud_worst:e}"))?;
    Ok(format!("dimer max rel err {dimer_worst:.1e}; clouds up to 500 atoms max rel err {cloud_worst:.1e}"))
}

fn pdf_peaks() -> Outcome {
    let cu = ElementTable::builtin().lookup("Cu").unwrap();
    let p = DebyeParams { biso: 0.0, ..DebyeParams::WIDE_ANGLE };
    let mut worst = 0f64;
    for d in [1.5, 2.5, 4.0] {
        let pos = [[0.0; 3], [d, 0.0, 0.0]];
        for (radiation, kind) in [(Radiation::Xray, CurveKind::Xrd), (Radiation::Neutron, CurveKind::Nd)] {
            let values = debye_intensity(&pos, &[cu, cu], &p, radiation, SumMode::Binned).map_err(|e| e.to_string())?;
            let iq = ScatteringCurve { kind, grid: p.q_grid(), values };
            let g = reduce_pdf(&iq, &[cu, cu], &p).map_err(|e| e.to_string())?;
            let k = (0..g.values.len()).max_by(|&a, &b| g.values[a].total_cmp(&g.values[b])).unwrap();
            let off = (g.grid[k] - d).abs();
            ensure(off <= 2.0 * p.rstep + 1e-12, format!("d={d} {kind:?}: peak at {}", g.grid[k]))?;
            worst = worst.max(off);
        }
    }
    Ok(format!("peak offset at most {worst:.3} A (tolerance 0.02 A)"))
}

fn geometry() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&case_strategy(), |c| check_case(&c).map_err(TestCaseError::fail))
        .map_err(|e| e.to_string())?;
    Ok("1000 random cells, zero failures".into())
}

fn cleaner_corpus() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/cleaner");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cif"))
        .collect();
    paths.sort();
    ensure(paths.len() == 20, format!("{} fixtures", paths.len()))?;
    let mut rejected = 0;
    for path in &paths {
        let id = path.file_stem().unwrap().to_string_lossy().into_owned();
        let expected = fs::read_to_string(path.with_extension("expected")).map_err(|e| e.to_string())?;
        let (doc, report) = clean_bytes(&fs::read(path).map_err(|e| e.to_string())?, &id);
        ensure(report.to_text() == expected, format!("{id}: report differs"))?;
        if report.rejected {
            rejected += 1;
        }
        let Some(doc) = doc else { continue };
        let text = write_document(&doc);
        let reparsed = parse(text.as_bytes(), &id).map_err(|e| format!("{id}: {e}"))?;
        let (again, second) = clean(&reparsed);
        ensure(second.fixes.is_empty() && second.rejected == report.rejected, format!("{id}: not idempotent"))?;
        ensure(write_document(&again) == text, format!("{id}: output changed on second pass"))?;
    }
    Ok(format!("20 fixtures match ({rejected} rejected); second pass is a no-op"))
}

fn statistics_shape(run: &Result<Run, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let s = statistics(&run.manifest.graph_summaries, 5.0).map_err(|e| e.to_string())?;
    let types: BTreeSet<u64> = s.crystal_type.values().copied().collect();
    ensure(s.crystal_type.len() == 12 && types.len() == 1, format!("crystal types {:?}", s.crystal_type))?;
    ensure(
        s.unique_elements.keys().copied().collect::<Vec<_>>() == [2],
        format!("unique elements {:?}", s.unique_elements),
    )?;
    ensure(s.crystal_system[..3].iter().all(|&c| c == 0), format!("crystal systems {:?}", s.crystal_system))?;
    let per_type = types.into_iter().next().unwrap_or(0);
    Ok(format!(
        "12 crystal types x {per_type}; all graphs have 2 elements; systems 4-7 counts {:?}",
        &s.crystal_system[3..]
    ))
}

fn splits() -> Outcome {
    let ids: Vec<String> = (0..3180).map(|k| format!("g{k:04}")).collect();
    let sp = split(&ids, [0.8, 0.1, 0.1], 0);
    let sizes = (sp.train.len(), sp.validation.len(), sp.test.len());
    ensure(sizes == (2544, 318, 318), format!("split sizes {sizes:?}"))?;
    let all: BTreeSet<&String> = sp.train.iter().chain(&sp.validation).chain(&sp.test).collect();
    ensure(all.len() == 3180, "splits overlap")?;

    let records: Vec<(String, i64)> = (0..7 * 500).map(|k| (format!("s{k:04}"), (k % 7 + 1) as i64)).collect();
    let classes: Vec<i64> = (1..=7).collect();
    let subset = stratified_subset(&records, &classes, 425, 0).map_err(|e| e.to_string())?;
    let distinct: BTreeSet<&String> = subset.iter().collect();
    ensure(subset.len() == 2975 && distinct.len() == 2975, format!("stratified size {}", subset.len()))?;
    for c in &classes {
        let n = subset.iter().filter(|id| records.iter().any(|(r, k)| r == *id && k == c)).count();
        ensure(n == 425, format!("class {c}: {n}"))?;
    }
    Ok("2544/318/318; stratified 7 x 425 = 2975".into())
}

fn record_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir.join(GRAPH_DIR)).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        let bytes = fs::read(&p).map_err(|e| e.to_string())?;
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), bytes));
    }
    out.sort();
    Ok(out)
}

fn determinism(a: &Result<Run, String>, b: &Result<Run, String>) -> Outcome {
    let a = a.as_ref().map_err(Clone::clone)?;
    let b = b.as_ref().map_err(Clone::clone)?;
    let (fa, fb) = (record_files(&a.dir)?, record_files(&b.dir)?);
    ensure(fa.len() == 3180 && fa.len() == fb.len(), format!("{} vs {} records", fa.len(), fb.len()))?;
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        ensure(na == nb && ba == bb, format!("{na} differs"))?;
    }
    ensure(a.manifest.splits == b.manifest.splits, "splits differ")?;
    ensure(a.manifest.records == b.manifest.records, "manifest records differ")?;
    Ok(format!("3180 record files byte-identical with 1 and 3 workers ({:.1}s second run)", b.elapsed.as_secs_f64()))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panic: {msg}"))
    })
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let first = generate(tmp.path(), "run1", 1);
    let results: Vec<(usize, Outcome)> = vec![
        (1, guarded(|| count(&first))),
        (2, guarded(|| shapes(&first))),
        (3, guarded(debye_oracle)),
        (4, guarded(pdf_peaks)),
        (5, guarded(geometry)),
        (6, guarded(cleaner_corpus)),
        (7, guarded(|| statistics_shape(&first))),
        (8, guarded(splits)),
        (9, guarded(|| {
            let second = generate(tmp.path(), "run2", 3);
            determinism(&first, &second)
        })),
    ];
    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n}: PASS {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
