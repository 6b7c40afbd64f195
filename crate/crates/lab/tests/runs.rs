use std::path::PathBuf;

use halfspace_lab::{run, Config, Verdict};

fn out_dir(tag: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("runs-{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

const EXAMPLE6: &str = "seed = 7\n[[scenarios]]\nkind = \"example6\"\nsamples = 200\n";

#[test]
fn empty_config_writes_only_the_manifest() {
    let mut cfg = Config::from_toml("seed = 3\n").unwrap();
    cfg.out_dir = out_dir("empty");
    let m = run(&cfg).unwrap();
    assert!(m.scenarios.is_empty());
    assert_eq!(m.seed, 3);
    let files: Vec<_> = std::fs::read_dir(&cfg.out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files, vec!["manifest.json".to_string()]);
}

#[test]
fn example6_files_and_rerun_hashes() {
    let mut cfg = Config::from_toml(EXAMPLE6).unwrap();
    cfg.out_dir = out_dir("example6-a");
    let first = run(&cfg).unwrap();
    assert_eq!(first.verdict, Verdict::Pass);
    let entry = &first.scenarios[0];
    let mut names: Vec<&str> = entry.outputs.iter().map(|o| o.file.as_str()).collect();
    names.sort();
    assert_eq!(names, vec!["example6_H.csv", "example6_ratios.csv"]);
    for o in &entry.outputs {
        assert!(cfg.out_dir.join(&o.file).is_file());
    }

    let manifest_a = std::fs::read(cfg.out_dir.join("manifest.json")).unwrap();
    cfg.out_dir = out_dir("example6-b");
    let second = run(&cfg).unwrap();
    let manifest_b = std::fs::read(cfg.out_dir.join("manifest.json")).unwrap();
    assert_eq!(first.config_sha256, second.config_sha256);
    assert_eq!(entry.outputs, second.scenarios[0].outputs);
    assert_eq!(manifest_a, manifest_b);
}

#[test]
fn config_hash_ignores_output_directory() {
    let mut a = Config::from_toml(EXAMPLE6).unwrap();
    let mut b = a.clone();
    a.out_dir = "x".into();
    b.out_dir = "y".into();
    assert_eq!(a.canonical_json(), b.canonical_json());
    let c = Config::from_toml(&EXAMPLE6.replace("seed = 7", "seed = 8")).unwrap();
    assert_ne!(a.canonical_json(), c.canonical_json());
}

#[test]
fn config_parsing() {
    let cfg = Config::from_toml(
        "seed = 11\nworkers = 1\n[growth]\nname = \"power\"\nparams = [0.25]\n\
         [[scenarios]]\nkind = \"jn\"\nvariant = \"bmo\"\nfunction = { name = \"log-inv\" }\n",
    )
    .unwrap();
    assert_eq!(cfg.seed, 11);
    assert_eq!(cfg.growth.name, "power");
    assert_eq!(cfg.growth.params, vec![0.25]);
    assert_eq!(cfg.scenarios.len(), 1);
    assert_eq!(cfg.scenarios[0].name(), "jn");
    assert!(!cfg.record_timings);

    assert!(Config::from_toml("[[scenarios]]\nkind = \"nonsense\"\n").is_err());
    assert!(Config::from_toml("seed = \"seven\"\n").is_err());
}
