//! End-to-end tests of the `xsub` binary: exit codes, artifact flow, and
//! the documented CLI surfaces.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn xsub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xsub"))
        .args(args)
        .env_remove("XSUB_OUT")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("run.cfg");
    fs::write(
        &path,
        "dataset.synth.n_per_class = 80\n\
         dataset.synth.d = 16\n\
         dataset.synth.classes = 2\n\
         dataset.shape = 4x4x1\n\
         model.hidden = 16\n\
         model.epochs = 10\n\
         model.lr = 0.05\n\
         model.batch = 16\n\
         explainer.mode = kernel\n\
         explainer.coalitions = 32\n\
         explainer.background = 4\n\
         attack.alphas = 1,100\n\
         attack.betas = 1,100\n\
         attack.ks = 1\n\
         attack.golden_set_size = 4\n\
         attack.eval_samples = 8\n\
         sweep.seeds = 1,2,3\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn unknown_config_key_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "attack.alpha = 3\n").unwrap();
    let out = xsub(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("attack.alpha"), "{stderr}");
}

#[test]
fn missing_config_file_exits_3() {
    let out = xsub(&["train", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_checkpoint_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = xsub(&["attack", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.bin"));
}

#[test]
fn train_golden_attack_flow_produces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out_str = out_dir.to_str().unwrap();

    let train = xsub(&["train", "--config", &cfg, "--out", out_str]);
    assert_eq!(train.status.code(), Some(0), "{}", String::from_utf8_lossy(&train.stderr));
    assert!(out_dir.join("model.bin").exists());

    let golden = xsub(&["golden", "--config", &cfg, "--out", out_str]);
    assert_eq!(golden.status.code(), Some(0));
    assert!(out_dir.join("golden_cache.json").exists());

    let attack = xsub(&["attack", "--config", &cfg, "--out", out_str]);
    assert_eq!(attack.status.code(), Some(0));
    assert!(out_dir.join("outcomes.json").exists());
    let stdout = String::from_utf8_lossy(&attack.stdout);
    assert!(stdout.contains("2 predicts + 1 explain"), "{stdout}");

    let export = xsub(&["export-images", "--config", &cfg, "--out", out_str]);
    assert_eq!(export.status.code(), Some(0));
    let images: Vec<_> = fs::read_dir(out_dir.join("images")).unwrap().collect();
    assert!(!images.is_empty());
}

#[test]
fn attack_rebuilds_a_missing_golden_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out_str = out_dir.to_str().unwrap();
    assert_eq!(xsub(&["train", "--config", &cfg, "--out", out_str]).status.code(), Some(0));
    // no golden step: the attack run must rebuild and persist the cache
    let attack = xsub(&["attack", "--config", &cfg, "--out", out_str]);
    assert_eq!(attack.status.code(), Some(0), "{}", String::from_utf8_lossy(&attack.stderr));
    assert!(out_dir.join("golden_cache.json").exists());
}

#[test]
fn sweep_writes_one_row_per_cell_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("sweep");
    let sweep = xsub(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(sweep.status.code(), Some(0), "{}", String::from_utf8_lossy(&sweep.stderr));
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    // 2 alphas x 2 betas x 1 k x 1 mode x 3 seeds = 12 cells + header
    assert_eq!(rows.len(), 13, "{csv}");
    assert!(rows[0].starts_with("seed,alpha,beta,k,mode,scenario"));
    for row in &rows[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[9], "2", "queries_predict");
        assert_eq!(fields[10], "1", "queries_explain");
    }
    assert!(out_dir.join("plot_adversarial_k1_paired.csv").exists());
}

fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| &l[..l.rfind(',').unwrap()])
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn sweep_repeats_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut csvs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "4")] {
        let out_dir = dir.path().join(name);
        let run = xsub(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--workers", workers]);
        assert_eq!(run.status.code(), Some(0));
        csvs.push(fs::read_to_string(out_dir.join("results.csv")).unwrap());
    }
    assert_eq!(strip_wall_time(&csvs[0]), strip_wall_time(&csvs[1]));
}

#[test]
fn seed_override_restricts_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let run = xsub(&[
        "sweep", "--config", &cfg,
        "--out", out_dir.to_str().unwrap(),
        "--seed-override", "7",
    ]);
    assert_eq!(run.status.code(), Some(0));
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5); // header + 4 cells x 1 seed
    for row in csv.lines().skip(1) {
        assert!(row.starts_with("7,"), "{row}");
    }
}

#[test]
fn xsub_out_env_is_the_fallback_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("from-env");
    let run = Command::new(env!("CARGO_BIN_EXE_xsub"))
        .args(["train", "--config", &cfg])
        .env("XSUB_OUT", &out_dir)
        .output()
        .expect("binary runs");
    assert_eq!(run.status.code(), Some(0));
    assert!(out_dir.join("model.bin").exists());
}

#[test]
fn idx_dataset_flows_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();

    // tiny IDX pair: 4x4 images, class = bright half (top vs bottom)
    let write_idx = |prefix: &str, count: usize, seed: u64| {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        let mut state = seed;
        for i in 0..count {
            let class = i % 2;
            labels.push(class as u8);
            for row in 0..4 {
                for _col in 0..4 {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    let noise = (state >> 58) as u8;
                    let bright = (class == 0 && row < 2) || (class == 1 && row >= 2);
                    images.push(if bright { 200 + noise } else { 20 + noise });
                }
            }
        }
        let img_path = dir.path().join(format!("{prefix}-images.idx"));
        let lbl_path = dir.path().join(format!("{prefix}-labels.idx"));
        let mut img = Vec::new();
        img.extend(0x00000803u32.to_be_bytes());
        img.extend((count as u32).to_be_bytes());
        img.extend(4u32.to_be_bytes());
        img.extend(4u32.to_be_bytes());
        img.extend(&images);
        fs::write(&img_path, img).unwrap();
        let mut lbl = Vec::new();
        lbl.extend(0x00000801u32.to_be_bytes());
        lbl.extend((count as u32).to_be_bytes());
        lbl.extend(&labels);
        fs::write(&lbl_path, lbl).unwrap();
        (img_path, lbl_path)
    };
    let (train_img, train_lbl) = write_idx("train", 80, 5);
    let (test_img, test_lbl) = write_idx("test", 24, 9);

    let cfg_path = dir.path().join("idx.cfg");
    fs::write(
        &cfg_path,
        format!(
            "dataset.kind = idx\n\
             dataset.idx.train_images = {}\n\
             dataset.idx.train_labels = {}\n\
             dataset.idx.test_images = {}\n\
             dataset.idx.test_labels = {}\n\
             model.hidden = 16\n\
             model.epochs = 12\n\
             model.lr = 0.1\n\
             model.batch = 16\n\
             explainer.mode = kernel\n\
             explainer.coalitions = 32\n\
             explainer.background = 4\n\
             attack.alphas = 1\n\
             attack.betas = 1\n\
             attack.ks = 1\n\
             attack.golden_set_size = 4\n\
             attack.eval_samples = 8\n\
             sweep.seeds = 1\n",
            train_img.display(),
            train_lbl.display(),
            test_img.display(),
            test_lbl.display()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out_str = out_dir.to_str().unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let train = xsub(&["train", "--config", cfg, "--out", out_str]);
    assert_eq!(train.status.code(), Some(0), "{}", String::from_utf8_lossy(&train.stderr));
    let attack = xsub(&["attack", "--config", cfg, "--out", out_str]);
    assert_eq!(attack.status.code(), Some(0), "{}", String::from_utf8_lossy(&attack.stderr));
}
