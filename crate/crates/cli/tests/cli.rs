use std::process::{Command, Output};

fn cqmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqmc")).args(args).output().expect("run cqmc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn generate_sobol_csv() {
    let o = cqmc(&["generate", "--d", "2", "--n", "4"]);
    assert!(o.status.success());
    let rows: Vec<Vec<f64>> = stdout(&o)
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows, vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![0.25, 0.75], vec![0.75, 0.25]]);
}

#[test]
fn generate_digits_format() {
    let o = cqmc(&["generate", "--family", "halton", "--d", "2", "--n", "3", "--format", "digits", "--precision", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "000,000\n100,100\n010,200\n");
}

#[test]
fn scramble_is_reproducible_and_rep_dependent() {
    let a = cqmc(&["scramble", "--d", "3", "--n", "8", "--mode", "coarse", "--seed", "5", "--rep", "1"]);
    let b = cqmc(&["scramble", "--d", "3", "--n", "8", "--mode", "coarse", "--seed", "5", "--rep", "1"]);
    let c = cqmc(&["scramble", "--d", "3", "--n", "8", "--mode", "coarse", "--seed", "5", "--rep", "2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn check_net_pass() {
    let ok = cqmc(&["check-net", "--d", "4", "--m", "8", "--mode", "coarse", "--seed", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&ok)).unwrap();
    assert_eq!(v["verdict"], true);
    assert!(v["witness"].is_null());
}

#[test]
fn check_net_failure_reports_witness() {
    // the third Sobol' coordinate has degree 2, so unit blocks fail at t = 0
    let o = cqmc(&["check-net", "--d", "3", "--m", "4", "--e", "1,1,1"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], false);
    let w = &v["witness"];
    assert_ne!(w["count"], w["expected"]);
}

#[test]
fn invalid_input_exits_with_two() {
    let o = cqmc(&["check-net", "--poly", "11,11", "--m", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cqmc(&["check-net", "--family", "halton", "--d", "2", "--m", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gain_methods_agree() {
    let mut seen = Vec::new();
    for method in ["brute", "counts", "closed"] {
        let o = cqmc(&["gain", "--family", "halton", "--d", "2", "--u", "1,2", "--k", "0,0", "--n", "3", "--method", method]);
        assert!(o.status.success(), "{method}");
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        seen.push(v["gain"].as_str().unwrap().to_string());
    }
    assert_eq!(seen, vec!["4/3"; 3]);
}

#[test]
fn gain_table_header_and_rows() {
    let o = cqmc(&["gain-table", "--d", "2", "--kmax", "1", "--nmax", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,k,n,G_num,G_den"));
    // 2 singletons * 2 k * 4 n + 1 pair * 4 k * 4 n
    assert_eq!(lines.count(), 32);
    // Gamma_u = 2 is attained at n = 2 and the gain vanishes at n = 4
    assert!(text.contains("\n1;2,0;0,2,2,1\n"));
    assert!(text.contains("\n1;2,0;0,4,0,1\n"));
}

#[test]
fn gamma_reports_bound() {
    let o = cqmc(&["gamma", "--d", "10"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["holds"], true);
    assert!(v["gamma"].as_f64().unwrap() <= v["bound"].as_f64().unwrap());
}

#[test]
fn anova_from_grid_file() {
    let dir = std::env::temp_dir().join(format!("cqmc-anova-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("grid.txt");
    std::fs::write(&path, "p=2;levels=2\n1\n1\n0\n0\n").unwrap();
    let o = cqmc(&["anova", "--grid", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "u,k,sigma2\n1,0,1/4\n1,1,0\n");
}

#[test]
fn experiment_csv_and_json() {
    let dir = std::env::temp_dir().join(format!("cqmc-exp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("rows.csv");
    let args = ["experiment", "--integrand", "linear37", "--mode", "usual", "--mmin", "2", "--mmax", "6", "--reps", "8", "--seed", "7"];
    let o = cqmc(&[&args[..], &["--out", csv.to_str().unwrap()]].concat());
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("m,n,rmse,rmse_stderr,mean_estimate\n"));
    assert_eq!(text.lines().count(), 6);

    let again = cqmc(&args);
    assert_eq!(stdout(&again), text);

    let j = cqmc(&[&args[..], &["--format", "json"]].concat());
    let v: serde_json::Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
    assert_eq!(v[0]["n"], 4);
}

#[test]
fn polys_counts() {
    let o = cqmc(&["polys", "--degree", "13", "--kind", "primitive", "--count"]);
    assert_eq!(stdout(&o).trim(), "630");
    let o = cqmc(&["polys", "--degree", "3"]);
    assert_eq!(stdout(&o), "1101\n1011\n");
}

#[test]
fn unknown_integrand_fails() {
    let o = cqmc(&["experiment", "--integrand", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
