use asyncq::harness::{ErrorTrace, TraceRow, TRACE_HEADER};

fn sample() -> ErrorTrace {
    let mut rows = Vec::new();
    for r in 0..3u64 {
        for (i, t) in [1u64, 10, 100, 1000].into_iter().enumerate() {
            let error = 1.0 / (t as f64).sqrt() + r as f64 * 1e-3 + 0.1f64.powi(i as i32 + 7);
            rows.push(TraceRow { replication: r, t, error, alpha: 0.5 / (t as f64 + 3.0) });
        }
    }
    ErrorTrace { rows }
}

#[test]
fn write_then_read_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/trace.csv");
    let trace = sample();
    trace.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(TRACE_HEADER));
    let back = ErrorTrace::read_csv(&path).unwrap();
    assert_eq!(back, trace);
    assert_eq!(back.to_csv_bytes().unwrap(), trace.to_csv_bytes().unwrap());
}

#[test]
fn medians_and_final_errors() {
    let trace = sample();
    let med = trace.median_by_checkpoint();
    assert_eq!(med.iter().map(|p| p.0).collect::<Vec<_>>(), [1, 10, 100, 1000]);
    // Replication 1 sits in the middle at every checkpoint.
    for (t, m) in med {
        let mid = trace.rows.iter().find(|r| r.replication == 1 && r.t == t).unwrap();
        assert_eq!(m, mid.error);
    }
    assert_eq!(trace.final_errors().len(), 3);
}

#[test]
fn rejects_wrong_header() {
    let bad = "rep,t,error,alpha\n0,1,0.5,0.1\n";
    assert!(ErrorTrace::from_csv_reader(bad.as_bytes()).is_err());
}
