use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use thcdma::macsim::Layer;
use thcdma::report::{read_csv, BudgetRow, CapacityRow, CsvKind, Fig3Row, Fig4Row};

fn thcdma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thcdma")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = thcdma(&["budget", "--config", "/no/such/thcdma.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/thcdma.toml"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(thcdma(&["fig4", "--bits", "0"]).status.code(), Some(2));
    assert_eq!(thcdma(&["fig3", "--onus", ""]).status.code(), Some(2));
    assert_eq!(thcdma(&["fig3", "--onus", "200"]).status.code(), Some(2));
    assert_eq!(thcdma(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn budget_writes_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let o = thcdma(&["budget", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("receiver"));
    let (meta, rows): (_, Vec<BudgetRow>) =
        read_csv(fs::File::open(dir.path().join("budget.csv")).unwrap(), CsvKind::Budget).unwrap();
    assert_eq!(meta.seed, 1);
    let get = |name: &str| rows.iter().find(|r| r.point == name).unwrap().dbm;
    assert_eq!(get("splitter1_out"), -26.0);
    assert_eq!(get("receiver"), -27.0);
}

#[test]
fn heavy_splitters_fail_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "[optics]\nsplitter_loss_db = 30.0\n").unwrap();
    let o = thcdma(&[
        "budget",
        "--config",
        config.to_str().unwrap(),
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("BELOW SENSITIVITY"));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "[ecc]\nrs_k = \"many\"\n").unwrap();
    let o = thcdma(&["budget", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rs_k") && err.contains("line 2"), "{err}");
}

#[test]
fn capacity_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = thcdma(&["capacity", "--points", "11", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows): (_, Vec<CapacityRow>) = read_csv(
        fs::File::open(dir.path().join("capacity.csv")).unwrap(),
        CsvKind::Capacity,
    )
    .unwrap();
    assert_eq!(rows.len(), 11);
    assert_eq!((rows[0].z_capacity, rows[0].bsc_capacity), (1.0, 1.0));
    assert!((rows[5].z_capacity - 0.3219).abs() < 1e-4);
    assert!(rows[5].bsc_capacity.abs() < 1e-12);
}

#[test]
fn fig3_reports_unreachable_cells_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "[optics]\nedfa_nf_db = 30.0\n").unwrap();
    let o = thcdma(&[
        "fig3",
        "--config",
        config.to_str().unwrap(),
        "--onus",
        "1,8",
        "--targets",
        "1e-2,1e-6",
        "--slots",
        "40000",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("unreachable"));
    let (_, rows): (_, Vec<Fig3Row>) =
        read_csv(fs::File::open(dir.path().join("fig3.csv")).unwrap(), CsvKind::Fig3).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().any(|r| r.min_er_db.is_some()));
    assert!(rows.iter().any(|r| r.min_er_db.is_none()));
}

#[test]
fn fig4_has_both_layers() {
    let dir = tempfile::tempdir().unwrap();
    let o = thcdma(&[
        "fig4",
        "--onus",
        "4,32",
        "--bits",
        "2000",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows): (_, Vec<Fig4Row>) =
        read_csv(fs::File::open(dir.path().join("fig4.csv")).unwrap(), CsvKind::Fig4).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r.layer == Layer::Physical).count(), 2);
    assert!(rows.iter().all(|r| r.post_ecc_ber == Some(0.0)));
}

#[test]
fn selftest_passes_and_names_broken_invariants() {
    let o = thcdma(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));

    // Same construction, one edge moved so column 0 loses a check.
    let ecc = thcdma::ecc::EccConfig::default();
    let code = thcdma::ecc::LdpcCode::build(ecc.ldpc_rows, ecc.ldpc_cols, ecc.ldpc_col_weight, ecc.ldpc_seed).unwrap();
    let h = code.parity_check();
    let mut rows: Vec<Vec<u32>> = (0..h.rows()).map(|r| h.row(r).to_vec()).collect();
    let r = h.col(0)[0] as usize;
    let spare = (0..h.cols() as u32).find(|c| !rows[r].contains(c)).unwrap();
    rows[r].retain(|&c| c != 0);
    rows[r].push(spare);
    rows[r].sort_unstable();
    let broken = thcdma::ecc::ParityCheck::from_rows(h.cols(), rows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.txt");
    fs::write(&path, broken.to_sparse_text()).unwrap();
    let o = thcdma(&["selftest", "--ldpc-matrix", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL ldpc column weight"), "{}", stdout(&o));
}
