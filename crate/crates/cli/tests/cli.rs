use std::path::Path;
use std::process::{Command, Output};

fn spmvlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spmvlab"))
        .current_dir(dir)
        .env_remove("SPMVLAB_TOPOLOGY")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn convert_prints_storage_arrays() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&spmvlab(
        dir.path(),
        &["generate", "example", "-o", "e.mtx"],
    ));
    let csr = stdout(&spmvlab(dir.path(), &["convert", "e.mtx"]));
    assert_eq!(
        csr,
        "rows=4 cols=4 nnz=8\nptr=[0, 2, 5, 6, 8]\nindices=[1, 2, 0, 2, 3, 2, 1, 2]\ndata=[5, 2, 6, 8, 3, 4, 7, 1]\n"
    );
    let csr5 = stdout(&spmvlab(
        dir.path(),
        &[
            "convert", "e.mtx", "--to", "csr5", "--omega", "2", "--sigma", "2",
        ],
    ));
    assert!(csr5.contains("tile_ptr=[0, 1, 4]\n"));
    assert!(csr5.contains("bit_flag=[T, T, F, F | T, T, T, F]\n"));
    assert!(csr5.contains("y_off=[0, 1 | 0, 2]\n"));
    assert!(csr5.contains("indices=[1, 0, 2, 2 | 3, 1, 2, 2]\n"));
    assert!(csr5.contains("data=[5, 6, 2, 8 | 3, 7, 4, 1]\n"));
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&spmvlab(
        dir.path(),
        &["generate", "example", "-o", "e.mtx"],
    ));
    for args in [
        &["bench", "e.mtx", "--threads", "0"][..],
        &["bench", "e.mtx", "--min-reps", "9", "--max-reps", "3"],
        &[
            "bench",
            "e.mtx",
            "--format",
            "csr",
            "--scheme",
            "csr5-tiles",
        ],
        &["features", "e.mtx", "--precedence", "imported"],
        &["reorder", "e.mtx", "--window", "0"],
        &["frobnicate"],
        &["bench"],
    ] {
        let out = spmvlab(dir.path(), args);
        assert_eq!(out.status.code(), Some(64), "{args:?}");
    }
    assert_eq!(spmvlab(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn partial_failures_exit_2_and_keep_going() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&spmvlab(
        dir.path(),
        &["generate", "example", "-o", "e.mtx"],
    ));
    std::fs::write(dir.path().join("bad.mtx"), "not a matrix\n").unwrap();
    let out = spmvlab(
        dir.path(),
        &["bench", "bad.mtx", "e.mtx", "--threads", "1,2"],
    );
    assert_eq!(out.status.code(), Some(2));
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].get("error").is_some());
    assert_eq!(lines[2]["n_threads"], 2);
}

#[test]
fn features_train_importance_advise() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stdout(&spmvlab(
        d,
        &[
            "generate",
            "clustered",
            "--rows",
            "800",
            "--hot-rows",
            "20",
            "--nnz-hot",
            "200",
            "-o",
            "hot.mtx",
        ],
    ));
    stdout(&spmvlab(
        d,
        &[
            "generate",
            "banded",
            "--rows",
            "800",
            "--half-band",
            "40",
            "--nnz-per-row",
            "10",
            "-o",
            "band.mtx",
        ],
    ));
    stdout(&spmvlab(
        d,
        &[
            "generate",
            "banded",
            "--rows",
            "600",
            "--half-band",
            "5",
            "--nnz-per-row",
            "3",
            "-o",
            "thin.mtx",
        ],
    ));
    stdout(&spmvlab(
        d,
        &[
            "generate",
            "locality",
            "--groups",
            "8",
            "--rows-per-group",
            "64",
            "--cols",
            "1024",
            "-o",
            "loc.mtx",
        ],
    ));
    let mats = ["hot.mtx", "band.mtx", "thin.mtx", "loc.mtx"];
    stdout(&spmvlab(
        d,
        &[&["features"][..], &mats, &["--threads", "4", "-o", "f.csv"]].concat(),
    ));
    let csv = std::fs::read_to_string(d.join("f.csv")).unwrap();
    assert!(csv.starts_with("#schema=spmvlab.features/v1\nmatrix,speedup,source,"));
    assert_eq!(csv.lines().count(), 6);

    let advice = stdout(&spmvlab(d, &["advise", "f.csv"]));
    assert!(advice.contains("hot\n  R1-csr5"), "{advice}");

    let out = spmvlab(
        d,
        &[
            "train",
            "f.csv",
            "--min-leaf",
            "1",
            "--trees",
            "3",
            "--train-frac",
            "0.5",
            "-o",
            "m.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ranking = stdout(&spmvlab(d, &["importance", "m.json"]));
    assert!(ranking.lines().all(|l| l.split('\t').count() == 2));
    let tree = stdout(&spmvlab(d, &["importance", "m.json", "--tree", "0"]));
    assert!(tree.contains("speedup="));
}

#[test]
fn reorder_writes_a_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stdout(&spmvlab(
        d,
        &[
            "generate",
            "locality",
            "--groups",
            "4",
            "--rows-per-group",
            "8",
            "--cols",
            "64",
            "-o",
            "l.mtx",
        ],
    ));
    stdout(&spmvlab(
        d,
        &[
            "reorder", "l.mtx", "--window", "16", "-o", "r.mtx", "--perm", "p.txt",
        ],
    ));
    let mut perm: Vec<usize> = std::fs::read_to_string(d.join("p.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    perm.sort_unstable();
    assert_eq!(perm, (0..32).collect::<Vec<_>>());
}

#[test]
fn topology_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stdout(&spmvlab(d, &["generate", "example", "-o", "e.mtx"]));
    std::fs::write(d.join("bad.toml"), "cores = 3\ngroup_size = 2\n").unwrap();
    let out = spmvlab(d, &["simulate", "e.mtx", "--topology", "bad.toml"]);
    assert!(!out.status.success());
    let json = stdout(&spmvlab(d, &["simulate", "e.mtx", "--threads", "2"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["threads"].as_array().unwrap().len(), 2);
}
