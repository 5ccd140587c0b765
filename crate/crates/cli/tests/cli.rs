use std::process::{Command, Output};

fn ppmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppmc")).args(args).output().expect("run ppmc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_sphere_has_no_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = ppmc(&[
        "verify",
        "--fixtures",
        "sphere",
        "--checks",
        "ppmc,gauss-levi",
        "--grid",
        "5",
        "--no-timing",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("flag mismatches: 0"));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"gauss-levi\""));
    assert!(!text.contains("runtime_ms"));
}

#[test]
fn ellipsoid_failing_ppmc_is_expected() {
    let o = ppmc(&["verify", "--fixtures", "ellipsoid", "--checks", "ppmc", "--grid", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("FAIL"), "{out}");
    assert!(out.contains("flag mismatches: 0"));
}

#[test]
fn unknown_fixture_is_a_usage_error() {
    let o = ppmc(&["verify", "--fixtures", "no_such_surface"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn fixture_file_adds_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("extra.toml");
    std::fs::write(
        &file,
        "[[fixture]]\nname = \"small_sphere\"\nchart = \"sphere\"\nn = 3\nm = 1\n\
         domain = { lo = [-0.4, -0.4], hi = [0.4, 0.4] }\n",
    )
    .unwrap();
    let o = ppmc(&["list-fixtures", "--fixture-file", file.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("small_sphere"));
}

#[test]
fn family_writes_mesh_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("member.obj");
    let csv = dir.path().join("sweep.csv");
    let o = ppmc(&[
        "family",
        "--fixture",
        "catenoid",
        "--grid",
        "21",
        "--mesh",
        mesh.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let obj = std::fs::read_to_string(&mesh).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 21 * 21);
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 9);
}

#[test]
fn flag_demo_prints_grading() {
    let o = ppmc(&["flag-demo", "--algebra", "unitary", "--n", "3", "--dims", "1,2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split_whitespace().collect()).collect();
    for (deg, dim) in [("-1", "2"), ("0", "5"), ("1", "2")] {
        assert!(rows.iter().any(|r| r.as_slice() == [deg, dim]), "{out}");
    }
    assert!(out.contains("C1 PASS") && out.contains("C2 PASS"), "{out}");
}

#[test]
fn flag_demo_rejects_bad_dims() {
    let o = ppmc(&["flag-demo", "--n", "3", "--dims", "1,1"]);
    assert_eq!(o.status.code(), Some(2));
}
