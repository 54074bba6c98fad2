use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chiliforge::cif::{Site, UnitCell};
use chiliforge::elements::ElementPolicy;
use chiliforge_cod::*;

fn job(dir: &std::path::Path) -> FetchJob {
    FetchJob {
        endpoint: "http://cod.invalid/cod".into(),
        cache_dir: dir.to_path_buf(),
        retry: RetryPolicy {
            max_attempts: 4,
            backoff_base: Duration::from_millis(1),
        },
        parallel: 2,
        politeness: Duration::ZERO,
    }
}

/// Replays scripted statuses per URL and counts calls.
struct Scripted {
    script: Mutex<Vec<u16>>,
    calls: AtomicUsize,
}

impl Scripted {
    fn new(mut statuses: Vec<u16>) -> Self {
        statuses.reverse();
        Self { script: Mutex::new(statuses), calls: AtomicUsize::new(0) }
    }
}

impl Transport for Scripted {
    fn get(&self, url: &str) -> Result<Response, String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let status = self.script.lock().unwrap().pop().unwrap_or(200);
        Ok(Response { status, body: format!("data_{url}\n").into_bytes() })
    }
}

#[test]
fn id_lists() {
    assert_eq!(load_id_list(b"1000001\n1000002\n").unwrap(), vec![1000001, 1000002]);
    assert_eq!(load_id_list(b"7\n3\n7\n\n3,x\n").unwrap(), vec![7, 3]);
    assert!(matches!(load_id_list(b"abc\n"), Err(CodError::MalformedRow(1))));
    assert!(matches!(load_id_list(b"1\n\n2x\n"), Err(CodError::MalformedRow(3))));
}

#[test]
fn cache_hit_makes_no_request() {
    let tmp = tempfile::tempdir().unwrap();
    let j = job(tmp.path());
    std::fs::write(j.cache_path(42), b"cached").unwrap();
    let t = Scripted::new(vec![]);
    let (bytes, o) = fetch(42, &j, &t).unwrap();
    assert_eq!((bytes.as_slice(), o), (&b"cached"[..], Outcome::Cached));
    assert_eq!(t.calls.load(Ordering::SeqCst), 0);
}

#[test]
fn not_found_is_not_retried() {
    let tmp = tempfile::tempdir().unwrap();
    let t = Scripted::new(vec![404]);
    assert!(matches!(fetch(5, &job(tmp.path()), &t), Err(CodError::NotFound(5))));
    assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    assert!(!job(tmp.path()).cache_path(5).exists());
}

#[test]
fn two_server_errors_then_success() {
    let tmp = tempfile::tempdir().unwrap();
    let j = job(tmp.path());
    let t = Scripted::new(vec![503, 503, 200]);
    let (_, o) = fetch(9, &j, &t).unwrap();
    assert_eq!(o, Outcome::Fetched);
    assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    assert!(j.cache_path(9).exists());
}

#[test]
fn retries_are_bounded() {
    let tmp = tempfile::tempdir().unwrap();
    let t = Scripted::new(vec![500; 10]);
    assert!(matches!(fetch(9, &job(tmp.path()), &t), Err(CodError::TransportError { .. })));
    assert_eq!(t.calls.load(Ordering::SeqCst), 4);
}

#[test]
fn backoff_doubles() {
    let p = RetryPolicy { max_attempts: 5, backoff_base: Duration::from_secs(1) };
    let d: Vec<u64> = (1..=4).map(|k| p.delay(k).as_secs()).collect();
    assert_eq!(d, [1, 2, 4, 8]);
}

#[test]
fn ledger_covers_every_id_and_rerun_is_offline() {
    let tmp = tempfile::tempdir().unwrap();
    let j = job(tmp.path());
    let ids = [1, 2, 3, 4];
    let t = Scripted::new(vec![]);
    let reject_three = |id: u64, _: &[u8]| if id == 3 { Err(CurationReject::NoMetal) } else { Ok(()) };
    let first = fetch_all(&ids, &j, &t, &reject_three).unwrap();
    assert_eq!(first.entries.iter().map(|e| e.0).collect::<Vec<_>>(), ids);
    assert_eq!(first.entries[2].1, Outcome::FilteredOut(CurationReject::NoMetal));
    assert_eq!(first.count(|o| *o == Outcome::Fetched), 3);

    let t2 = Scripted::new(vec![]);
    let second = fetch_all(&ids, &j, &t2, &reject_three).unwrap();
    assert_eq!(t2.calls.load(Ordering::SeqCst), 0);
    assert_eq!(second.count(|o| *o == Outcome::Cached), 3);
    assert_eq!(second.to_tsv().lines().count(), 4);
}

fn cubic(a: f64, elements: &[&str]) -> UnitCell {
    UnitCell {
        name: "t".into(),
        crystal_type: None,
        a,
        b: a,
        c: a,
        alpha: 90.0,
        beta: 90.0,
        gamma: 90.0,
        spacegroup_number: 1,
        spacegroup_symbol: "P1".into(),
        sites: elements
            .iter()
            .enumerate()
            .map(|(k, e)| Site {
                label: format!("{e}{k}"),
                element: e.to_string(),
                frac: [0.1 * k as f64, 0.0, 0.0],
                occupancy: 1.0,
            })
            .collect(),
        symops: Vec::new(),
    }
}

#[test]
fn curation_filters() {
    let p = ElementPolicy::chili100k();
    assert_eq!(curate(&cubic(999.9f64.cbrt(), &["Cu", "O"]), &p), Ok(()));
    assert!(matches!(
        curate(&cubic(1000f64.cbrt() + 1e-12, &["Cu", "O"]), &p),
        Err(CurationReject::VolumeTooLarge(_))
    ));
    assert_eq!(
        curate(&cubic(4.0, &["Cu", "Kr"]), &p),
        Err(CurationReject::DisallowedElement("Kr".into()))
    );
    assert_eq!(curate(&cubic(4.0, &["O", "S"]), &p), Err(CurationReject::NoMetal));
}

#[test]
fn http_transport_against_local_server() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        for (k, stream) in listener.incoming().take(2).enumerate() {
            let mut s = stream.unwrap();
            let mut reader = BufReader::new(s.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
            }
            let (status, body) = if k == 0 { ("503 Service Unavailable", "") } else { ("200 OK", "data_x\n") };
            write!(s, "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len()).unwrap();
        }
    });
    let tmp = tempfile::tempdir().unwrap();
    let mut j = job(tmp.path());
    j.endpoint = format!("http://{addr}/cod");
    let t = HttpTransport::new(Duration::from_secs(10)).unwrap();
    let (bytes, o) = fetch(1000001, &j, &t).unwrap();
    assert_eq!((bytes.as_slice(), o), (&b"data_x\n"[..], Outcome::Fetched));
    server.join().unwrap();
}
