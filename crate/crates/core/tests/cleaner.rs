use std::fs;
use std::path::{Path, PathBuf};

use chiliforge::cif::{clean, clean_bytes, parse, write_document};

fn corpus() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/cleaner");
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cif"))
        .collect();
    v.sort();
    v
}

#[test]
fn corpus_has_twenty_cases() {
    assert_eq!(corpus().len(), 20);
}

#[test]
fn reports_match_expected() {
    for path in corpus() {
        let id = path.file_stem().unwrap().to_string_lossy().into_owned();
        let expected = fs::read_to_string(path.with_extension("expected")).unwrap();
        let (_, report) = clean_bytes(&fs::read(&path).unwrap(), &id);
        assert_eq!(report.to_text(), expected, "{id}");
    }
}

#[test]
fn cleaning_is_idempotent() {
    for path in corpus() {
        let id = path.file_stem().unwrap().to_string_lossy().into_owned();
        let (doc, report) = clean_bytes(&fs::read(&path).unwrap(), &id);
        let Some(doc) = doc else { continue };
        let text = write_document(&doc);
        let (again, second) = clean(&parse(text.as_bytes(), &id).unwrap());
        assert!(second.fixes.is_empty(), "{id}: {:?}", second.fixes);
        assert_eq!(second.rejected, report.rejected, "{id}");
        assert_eq!(write_document(&again), text, "{id}");
    }
}

#[test]
fn repaired_files_extract() {
    for path in corpus() {
        let id = path.file_stem().unwrap().to_string_lossy().into_owned();
        let (doc, report) = clean_bytes(&fs::read(&path).unwrap(), &id);
        if report.rejected {
            continue;
        }
        let cell = chiliforge::cif::extract_unit_cell(&doc.unwrap());
        assert!(cell.is_ok(), "{id}: {cell:?}");
    }
}
