use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn detmmot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detmmot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn discrete(atoms: Value, weights: Value, dim: usize) -> Value {
    json!({"type": "discrete", "dim": dim, "atoms": atoms, "weights": weights})
}

fn axis_instance() -> Value {
    json!({
        "objective": "det",
        "marginals": [
            discrete(json!([[1.0, 0.0], [0.0, 1.0]]), json!([0.5, 0.5]), 2),
            discrete(json!([[0.0, 1.0], [-1.0, 0.0]]), json!([0.5, 0.5]), 2),
        ]
    })
}

#[test]
fn solve_axis_instance_and_certify_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "inst.json", &axis_instance());
    let out = dir.path().join("report.json");
    let o = detmmot(&["solve", "--instance", s(&inst), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&out);
    assert!((rep["primal_value"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    assert_eq!(rep["certified"], json!(true));

    let o = detmmot(&["certify", "--report", s(&out), "--instance", s(&inst)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn solve_dirac_absdet() {
    let dir = tempfile::tempdir().unwrap();
    let inst = json!({
        "marginals": [
            discrete(json!([[2.0, 0.0]]), json!([1.0]), 2),
            discrete(json!([[1.0, -0.5]]), json!([1.0]), 2),
        ]
    });
    let inst = write(dir.path(), "inst.json", &inst);
    let out = dir.path().join("r.json");
    let o = detmmot(&["solve", "--instance", s(&inst), "--objective", "absdet", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let v = read_json(&out)["primal_value"].as_f64().unwrap();
    assert!((v - 1.0).abs() <= 1e-12, "{v}");
}

#[test]
fn bad_inputs_exit_2_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let empty = json!({"objective": "det", "marginals": [
        discrete(json!([]), json!([]), 2),
        discrete(json!([[1.0, 0.0]]), json!([1.0]), 2),
    ]});
    let inst = write(dir.path(), "empty.json", &empty);
    let out = dir.path().join("never.json");
    let o = detmmot(&["solve", "--instance", s(&inst), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());

    let o = detmmot(&["solve", "--instance", s(&dir.path().join("missing.json"))]);
    assert_eq!(code(&o), 2);

    std::fs::write(dir.path().join("garbage.json"), "{not json").unwrap();
    let o = detmmot(&["solve", "--instance", s(&dir.path().join("garbage.json"))]);
    assert_eq!(code(&o), 2);

    // nothing but the inputs remains, in particular no staging files
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["empty.json", "garbage.json"]);
}

#[test]
fn size_guard_exits_4_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = detmmot(&["compare", "--ball-dim", "3", "--n-radii", "8", "--n-dirs", "20", "--out", s(&out)]);
    assert_eq!(code(&o), 4);
    assert!(!out.exists());
}

#[test]
fn radial_with_zero_samples_writes_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = detmmot(&["radial", "--ball-dim", "3", "--n", "0", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(csv, "x1_1,x1_2,x1_3,x2_1,x2_2,x2_3,x3_1,x3_2,x3_3,det\n");
    let summary = read_json(&out.join("summary.json"));
    assert!((summary["value_closed_form"].as_f64().unwrap() - 0.5).abs() <= 1e-6);
}

#[test]
fn radial_samples_certify_and_product_samples_do_not() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = detmmot(&["radial", "--ball-dim", "3", "--n", "2000", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let samples = out.join("samples.csv");
    let pots = out.join("potentials.json");
    let o = detmmot(&["certify", "--samples", s(&samples), "--potentials", s(&pots)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    // shuffle the second vector across rows: a product-like coupling
    let text = std::fs::read_to_string(&samples).unwrap();
    let mut lines: Vec<Vec<String>> = text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect();
    let rows = lines.len() - 1;
    let firsts: Vec<Vec<String>> = (1..=rows).map(|r| lines[r][0..3].to_vec()).collect();
    for r in 1..=rows {
        let src = &firsts[(r * 7) % rows];
        lines[r].splice(0..3, src.iter().cloned());
    }
    let shuffled: String = lines.iter().map(|l| l.join(",") + "\n").collect();
    std::fs::write(&samples, shuffled).unwrap();
    let report = dir.path().join("cert.json");
    let o = detmmot(&["certify", "--samples", s(&samples), "--potentials", s(&pots), "--out", s(&report)]);
    assert_eq!(code(&o), 3);
    assert_eq!(read_json(&report)["passed"], json!(false));
}

#[test]
fn certify_rejects_potentials_of_the_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&detmmot(&["radial", "--ball-dim", "3", "--n", "10", "--out", s(&a)])), 0);
    assert_eq!(code(&detmmot(&["radial", "--ball-dim", "2", "--n", "10", "--out", s(&b)])), 0);
    let o = detmmot(&[
        "certify",
        "--samples",
        s(&a.join("samples.csv")),
        "--potentials",
        s(&b.join("potentials.json")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn compare_single_direction_and_planar_instances() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = detmmot(&["compare", "--ball-dim", "3", "--n-radii", "4", "--n-dirs", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let c = read_json(&out);
    assert!(c["lp_value"].as_f64().unwrap().abs() <= 1e-12);
    assert!((c["relative_deviation"].as_f64().unwrap() - 1.0).abs() <= 1e-6);

    let o = detmmot(&["compare", "--ball-dim", "2", "--n-radii", "10", "--n-dirs", "12", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let c = read_json(&out);
    let (lp, cf) = (c["lp_value"].as_f64().unwrap(), c["closed_form_value"].as_f64().unwrap());
    assert!((lp - cf).abs() <= 0.05, "{lp} vs {cf}");
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        assert_eq!(code(&detmmot(&["--seed", seed, "radial", "--ball-dim", "3", "--n", "5000", "--out", s(&out)])), 0);
        (
            std::fs::read(out.join("samples.csv")).unwrap(),
            std::fs::read(out.join("summary.json")).unwrap(),
        )
    };
    let a = run("a", "42");
    let b = run("b", "42");
    let c = run("c", "43");
    assert!(a == b);
    assert!(a.0 != c.0);

    let m1 = dir.path().join("m1");
    let m2 = dir.path().join("m2");
    assert_eq!(code(&detmmot(&["monge4d", "--n", "500", "--out", s(&m1)])), 0);
    assert_eq!(code(&detmmot(&["monge4d", "--n", "500", "--out", s(&m2)])), 0);
    assert_eq!(
        std::fs::read(m1.join("maps.csv")).unwrap(),
        std::fs::read(m2.join("maps.csv")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_samples() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_detmmot"))
            .env("DETMMOT_THREADS", threads)
            .args(["radial", "--ball-dim", "3", "--n", "40000", "--out", s(&out)])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        outs.push(std::fs::read(out.join("samples.csv")).unwrap());
    }
    assert!(outs[0] == outs[1]);
}

#[test]
fn fubini_single_function() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.json");
    let o = detmmot(&["fubini-test", "--k", "3", "--f", "axis-squares", "--n", "200000", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let rows = read_json(&out);
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["passed"], json!(true));
    // both sides estimate 1/((k+1)(k+3)); the per-draw spread is below 0.2
    for side in ["lhs", "rhs"] {
        let v = rows[0][side].as_f64().unwrap();
        assert!((v - 1.0 / 24.0).abs() <= 2e-3, "{side} = {v}");
    }
}
