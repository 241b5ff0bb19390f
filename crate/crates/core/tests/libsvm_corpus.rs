use std::path::PathBuf;

use adastep::problems::{parse_libsvm_str, to_libsvm_string, LabelMap};
use adastep::Error;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

#[test]
fn bundled_files_round_trip_bit_exactly() {
    for name in ["mini.libsvm", "synthetic-2000.libsvm"] {
        let text = read(name);
        let parsed = parse_libsvm_str(&text, &LabelMap::default()).unwrap();
        assert_eq!(to_libsvm_string(&parsed), text, "{name}");
        let again = parse_libsvm_str(&to_libsvm_string(&parsed), &LabelMap::default()).unwrap();
        for (a, b) in parsed.rows().iter().zip(again.rows()) {
            let bits = |r: &adastep::problems::SparseRow| r.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
            assert_eq!(a.indices, b.indices);
        }
    }
}

#[test]
fn mini_corpus_contents() {
    let d = parse_libsvm_str(&read("mini.libsvm"), &LabelMap::default()).unwrap();
    assert_eq!(d.len(), 8);
    assert_eq!(d.dim(), 10);
    assert!(d.rows()[2].indices.is_empty());
    assert_eq!(d.rows()[1].values, vec![1e-7, 123456.789]);
    assert_eq!(d.labels().iter().filter(|&&y| y > 0.0).count(), 4);
}

#[test]
fn malformed_fixtures_report_their_line() {
    let cases = [
        ("bad_label.libsvm", 3),
        ("zero_index.libsvm", 2),
        ("unsorted_index.libsvm", 4),
        ("missing_colon.libsvm", 5),
        ("non_finite.libsvm", 2),
    ];
    for (name, line) in cases {
        match parse_libsvm_str(&read(&format!("malformed/{name}")), &LabelMap::default()) {
            Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "{name}"),
            other => panic!("{name}: expected a parse error, got {other:?}"),
        }
    }
}
