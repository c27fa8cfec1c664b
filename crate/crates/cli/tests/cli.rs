use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tumorsynth::phantom::{Phantom, PhantomSpec};
use tumorsynth::volume_io::{save_volume, LabelVolume};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tumorsynth")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn cube_mask(dir: &Path, name: &str, lo: usize, hi: usize) -> String {
    let dims = [10, 10, 10];
    let data = (0..1000)
        .map(|i| {
            let c = [i % 10, (i / 10) % 10, i / 100];
            c.iter().all(|&v| (lo..hi).contains(&v)) as u8
        })
        .collect();
    let path = dir.join(name);
    save_volume(&LabelVolume::new(dims, [1.0; 3], data).unwrap(), &path).unwrap();
    path.to_string_lossy().into_owned()
}

fn write_phantom_case(dir: &Path, id: &str) {
    let p = Phantom::generate(&PhantomSpec {
        dims: [36, 36, 36],
        ..PhantomSpec::default()
    })
    .unwrap();
    save_volume(&p.ct, dir.join(format!("{id}_ct.rvol"))).unwrap();
    save_volume(p.masks.organ(), dir.join(format!("{id}_organ.rvol"))).unwrap();
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["eval", "jaccard", "--pred", "a", "--gt", "b"]).status.code(), Some(1));
    assert_eq!(run(&["synth", "--out", "x"]).status.code(), Some(1));
}

#[test]
fn missing_input_exits_two() {
    let o = run(&["eval", "dsc", "--pred", "/nonexistent/a.rvol", "--gt", "/nonexistent/b.rvol"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn eval_dsc_and_nsd() {
    let tmp = tempfile::tempdir().unwrap();
    let a = cube_mask(tmp.path(), "pred.rvol", 2, 6);
    let b = cube_mask(tmp.path(), "gt.rvol", 2, 6);
    let c = cube_mask(tmp.path(), "shifted.rvol", 3, 7);

    let o = run(&["eval", "dsc", "--pred", &a, "--gt", &b]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "case_id,metric,value\npred,dsc,1\n");

    // 3^3 overlap out of two 4^3 cubes
    let o = run(&["eval", "dsc", "--pred", &a, "--gt", &c]);
    let value: f64 = stdout(&o).lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((value - 2.0 * 27.0 / 128.0).abs() < 1e-12);

    // a diagonal one-voxel shift puts every surface voxel within sqrt(3)
    let o = run(&["eval", "nsd", "--pred", &a, "--gt", &c, "--tau", "1.8"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(line.starts_with("pred,nsd_tau1.8,"), "{line}");
    assert_eq!(line.rsplit(',').next().unwrap(), "1");

    let o = run(&["eval", "nsd", "--pred", &a, "--gt", &c, "--tau", "1.5"]);
    let value: f64 = stdout(&o).lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(value < 1.0);
}

#[test]
fn eval_rejects_negative_tau() {
    let tmp = tempfile::tempdir().unwrap();
    let a = cube_mask(tmp.path(), "a.rvol", 2, 6);
    let o = run(&["eval", "nsd", "--pred", &a, "--gt", &a, "--tau=-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reader_metrics_policies() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("reads.csv");
    fs::write(&csv, "truth,call\nsynthetic,synthetic\nsynthetic,real\nreal,real\nreal,unsure\n").unwrap();
    let csv = csv.to_string_lossy().into_owned();

    let o = run(&["reader-metrics", "--csv", &csv]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "case_id,metric,value\nreads,sensitivity,0.5\nreads,specificity,0.5\nreads,accuracy,0.5\n"
    );
    // real tumors are the positive class
    let o = run(&["reader-metrics", "--csv", &csv, "--unsure", "drop"]);
    assert!(stdout(&o).contains("reads,sensitivity,1\n"));
}

#[test]
fn features_lists_every_feature() {
    let tmp = tempfile::tempdir().unwrap();
    let p = Phantom::generate(&PhantomSpec {
        dims: [10, 10, 10],
        ..PhantomSpec::default()
    })
    .unwrap();
    let img = tmp.path().join("img.rvol");
    save_volume(&p.ct, &img).unwrap();
    let mask = cube_mask(tmp.path(), "m.rvol", 3, 7);
    let o = run(&["features", "--image", img.to_str().unwrap(), "--mask", &mask]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 12);
    assert!(out.contains("img,volume_mm3,64\n"));
}

#[test]
fn synth_writes_outputs_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    write_phantom_case(tmp.path(), "c1");
    let manifest = tmp.path().join("manifest.csv");
    fs::write(&manifest, "c1,c1_ct.rvol,c1_organ.rvol\n").unwrap();
    let config = tmp.path().join("small.toml");
    fs::write(&config, "diameter_mm = [6.0, 10.0]\n").unwrap();

    for backend in ["ca", "handcrafted"] {
        let outs: Vec<_> = ["a", "b"]
            .iter()
            .map(|sub| {
                let out = tmp.path().join(format!("{backend}_{sub}"));
                let o = run(&[
                    "synth",
                    "--manifest",
                    manifest.to_str().unwrap(),
                    "--config",
                    config.to_str().unwrap(),
                    "--backend",
                    backend,
                    "--seed",
                    "11",
                    "--epoch",
                    "3",
                    "--out",
                    out.to_str().unwrap(),
                ]);
                assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
                out
            })
            .collect();
        for f in ["c1_img.rvol", "c1_msk.rvol", "c1_recipe.toml"] {
            assert_eq!(fs::read(outs[0].join(f)).unwrap(), fs::read(outs[1].join(f)).unwrap());
        }
        let recipe = fs::read_to_string(outs[0].join("c1_recipe.toml")).unwrap();
        assert!(recipe.contains("epoch 3"));
    }
}

#[test]
fn synth_with_only_bad_rows_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("manifest.csv");
    fs::write(&manifest, "c1,missing_ct.rvol,missing_organ.rvol\n").unwrap();
    let o = run(&[
        "synth",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("manifest.csv");
    fs::write(&manifest, "").unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "no_such_key = 1\n").unwrap();
    let o = run(&[
        "synth",
        "--manifest",
        manifest.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
