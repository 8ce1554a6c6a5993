//! End-to-end checks of the `bam-sr` binary: config handling, exit codes,
//! determinism, and consistency between the CLI paths and the library.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bam_sr::attention::{count_params, AttentionKind, AttentionSpec};
use bam_sr::imageio::{quantize_8bit, read_png, write_png};
use bam_sr::metrics::{bicubic_resize, rgb_to_y, MetricReport};
use bam_sr::network::{Insertion, NetworkSpec, SrNetwork};
use bam_sr::pipeline::{fresh_state, save_checkpoint, TrainSpec};
use bam_sr::synth::texture_image;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bam-sr"))
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("binary must launch");
    (
        status.code().expect("no signal exits expected"),
        String::from_utf8(stdout).expect("stdout is UTF-8"),
        String::from_utf8(stderr).expect("stderr is UTF-8"),
    )
}

fn make_hr_dir(dir: &Path, count: usize, side: usize, seed0: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..count {
        let img = texture_image(side, side, seed0 + i as u64);
        write_png(&dir.join(format!("tex{i}.png")), &img).unwrap();
    }
}

/// An untrained (zero-bodied) checkpoint whose network output is exactly the
/// bicubic upscale.
fn make_untrained_ckpt(path: &Path, blocks: usize, width: usize, scale: usize) {
    let spec = NetworkSpec::plain(blocks, width, scale)
        .with_attention(AttentionKind::Bam, Insertion::PerBlock);
    let net = SrNetwork::<f32>::build(&spec, 42).unwrap();
    let train = TrainSpec { scale, ..TrainSpec::default() };
    let state = fresh_state(train.seed);
    save_checkpoint(path, &net, &train, &state).unwrap();
}

fn grab_line<'a>(stdout: &'a str, prefix: &str) -> &'a str {
    stdout
        .lines()
        .find(|l| l.starts_with(prefix))
        .unwrap_or_else(|| panic!("no `{prefix}` line in:\n{stdout}"))
}

#[test]
fn count_prints_closed_form_parameter_counts() {
    let (code, out, _) = run(bin().args(["count", "--width", "64", "--attention", "bam"]));
    assert_eq!(code, 0);
    assert_eq!(grab_line(&out, "attention params"), "attention params 634");

    let (code, out, _) = run(bin().args(["count", "--width", "16", "--attention", "bam"]));
    assert_eq!(code, 0);
    assert_eq!(grab_line(&out, "attention params"), "attention params 100");

    let (code, out, _) = run(bin().args(["count", "--width", "64", "--attention", "none"]));
    assert_eq!(code, 0);
    assert_eq!(grab_line(&out, "attention params"), "attention params 0");
}

#[test]
fn count_orders_bam_below_cbam_at_the_published_size() {
    let flops_of = |kind: &str| -> u64 {
        let (code, out, _) = run(bin().args([
            "count",
            "--width",
            "64",
            "--attention",
            kind,
            "--input_size",
            "240x360",
        ]));
        assert_eq!(code, 0);
        let line = grab_line(&out, "attention flops");
        line.split_whitespace().nth(2).unwrap().parse().unwrap()
    };
    let bam = flops_of("bam");
    let cbam = flops_of("cbam");
    assert!(bam < cbam, "flops ordering at 240x360: {bam} !< {cbam}");
}

#[test]
fn unknown_config_key_is_rejected_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "widht=16\n").unwrap();
    let (code, _, err) = run(bin().args(["count", "--config"]).arg(&cfg));
    assert_eq!(code, 2, "config errors must exit 2: {err}");
    assert!(err.contains("widht"), "message must name the bad key: {err}");
}

#[test]
fn missing_dataset_key_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(bin()
        .args(["train", "--epochs", "1", "--out_dir"])
        .arg(dir.path().join("out")));
    assert_eq!(code, 2);
    assert!(err.contains("hr_dir"), "message must name the missing key: {err}");
}

fn train_config(dir: &Path, hr: &Path, out: &Path, attention: &str) -> PathBuf {
    let cfg = dir.join(format!("{attention}.cfg"));
    std::fs::write(
        &cfg,
        format!(
            "hr_dir={}\nout_dir={}\nblocks=2\nwidth=8\nscale=2\nattention={attention}\n\
             patch=8\nbatch=2\nepochs=2\nseed=11\nfive_crop=false\n",
            hr.display(),
            out.display()
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn same_seed_training_writes_identical_loss_traces() {
    let dir = tempfile::tempdir().unwrap();
    let hr = dir.path().join("hr");
    make_hr_dir(&hr, 3, 40, 70);

    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let cfg = train_config(dir.path(), &hr, &out, "bam");
        let (code, stdout, err) = run(bin().args(["train", "--config"]).arg(&cfg));
        assert_eq!(code, 0, "train failed: {err}");
        assert!(stdout.contains("parameters total="));
        assert!(stdout.contains("dataset pairs=3 patch=8 steps_per_epoch=2"));
        csvs.push(std::fs::read(out.join("loss.csv")).unwrap());
        assert!(out.join("model.ckpt").is_file());
    }
    assert_eq!(csvs[0], csvs[1], "same seed must give byte-identical traces");

    let trace = String::from_utf8(csvs[0].clone()).unwrap();
    assert!(trace.starts_with("epoch,lr,mean_l1\n"));
    assert_eq!(trace.lines().count(), 3, "header + one row per epoch");
}

#[test]
fn config_flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let hr = dir.path().join("hr");
    make_hr_dir(&hr, 2, 40, 80);
    let out = dir.path().join("out");
    let cfg = train_config(dir.path(), &hr, &out, "none");
    let (code, _, err) = run(bin().args(["train", "--epochs", "3", "--config"]).arg(&cfg));
    assert_eq!(code, 0, "{err}");
    let trace = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4, "the flag's 3 epochs must beat the file's 2");
}

#[test]
fn parameter_log_lines_differ_by_the_attention_count() {
    let dir = tempfile::tempdir().unwrap();
    let hr = dir.path().join("hr");
    make_hr_dir(&hr, 2, 40, 90);

    let parse = |stdout: &str| -> (usize, usize) {
        let line = grab_line(stdout, "parameters total=");
        let total = line
            .split("total=")
            .nth(1)
            .unwrap()
            .split_whitespace()
            .next()
            .unwrap()
            .parse()
            .unwrap();
        let attention = line.split("attention=").nth(1).unwrap().trim().parse().unwrap();
        (total, attention)
    };

    let mut results = Vec::new();
    for kind in ["bam", "none"] {
        let out = dir.path().join(kind);
        let cfg = train_config(dir.path(), &hr, &out, kind);
        let (code, stdout, err) = run(bin().args(["train", "--epochs", "1", "--config"]).arg(&cfg));
        assert_eq!(code, 0, "{err}");
        results.push(parse(&stdout));
    }
    let ((bam_total, bam_attn), (none_total, none_attn)) = (results[0], results[1]);
    assert_eq!(none_attn, 0);
    // Two blocks, one module per block, width 8.
    let per_module = count_params(&AttentionSpec::new(AttentionKind::Bam, 8));
    assert_eq!(bam_attn, 2 * per_module);
    assert_eq!(bam_total - none_total, bam_attn, "totals must differ by exactly the modules");
}

#[test]
fn eval_on_an_untrained_network_reproduces_the_bicubic_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let hr = dir.path().join("hr");
    make_hr_dir(&hr, 3, 48, 100);
    let ckpt = dir.path().join("zero.ckpt");
    make_untrained_ckpt(&ckpt, 2, 8, 2);
    let csv = dir.path().join("eval.csv");

    let (code, out, err) = run(bin()
        .args(["eval", "--checkpoint"])
        .arg(&ckpt)
        .args(["--hr_dir"])
        .arg(&hr)
        .args(["--out_csv"])
        .arg(&csv));
    assert_eq!(code, 0, "{err}");

    let mut rows = 0;
    for line in out.lines() {
        let Some((_, tail)) = line.split_once(" net ") else { continue };
        let (net_col, bicubic_col) = tail.split_once(" bicubic ").unwrap();
        assert_eq!(net_col, bicubic_col, "zero body must equal bicubic: {line}");
        rows += 1;
    }
    assert_eq!(rows, 3 + 1, "three image rows plus the mean row");

    // Raw CSV columns agree too, and match direct metric computation.
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    for line in csv_text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], f[4], "psnr columns: {line}");
        assert_eq!(f[2], f[5], "ssim columns: {line}");
    }
    let first = csv_text.lines().nth(1).unwrap();
    let name = first.split(',').next().unwrap();
    let psnr_csv: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    let hr_img = read_png(&hr.join(format!("{name}.png"))).unwrap();
    let lr = bicubic_resize(&hr_img, 24, 24).unwrap();
    let upscaled = quantize_8bit(&bicubic_resize(&lr, 48, 48).unwrap());
    let direct = MetricReport::measure(&rgb_to_y(&hr_img).unwrap(), &rgb_to_y(&upscaled).unwrap(), 2).unwrap();
    assert!(
        (psnr_csv - direct.psnr_db).abs() <= 1e-9,
        "CSV {psnr_csv} vs direct {}",
        direct.psnr_db
    );
}

#[test]
fn eval_rejects_a_scale_disagreeing_with_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let hr = dir.path().join("hr");
    make_hr_dir(&hr, 1, 48, 110);
    let ckpt = dir.path().join("zero.ckpt");
    make_untrained_ckpt(&ckpt, 1, 8, 2);
    let (code, _, err) = run(bin()
        .args(["eval", "--scale", "3", "--checkpoint"])
        .arg(&ckpt)
        .args(["--hr_dir"])
        .arg(&hr));
    assert_eq!(code, 2, "scale mismatch is a config error: {err}");
    assert!(err.contains("scale"), "{err}");
}

#[test]
fn infer_obeys_the_shape_law_and_the_skip_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    // Asymmetric size so width/height mixups would show: 14 rows, 20 cols.
    write_png(&input, &texture_image(14, 20, 120)).unwrap();
    let ckpt = dir.path().join("zero.ckpt");
    make_untrained_ckpt(&ckpt, 1, 8, 2);

    let out1 = dir.path().join("sr1.png");
    let out2 = dir.path().join("sr2.png");
    for out in [&out1, &out2] {
        let (code, stdout, err) = run(bin()
            .args(["infer", "--checkpoint"])
            .arg(&ckpt)
            .args(["--input"])
            .arg(&input)
            .args(["--output"])
            .arg(out));
        assert_eq!(code, 0, "{err}");
        assert!(stdout.contains("(20x14 -> 40x28)"), "shape report: {stdout}");
    }
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(&out2).unwrap(),
        "inference must be deterministic"
    );

    let produced = read_png(&out1).unwrap();
    let want = quantize_8bit(&bicubic_resize(&read_png(&input).unwrap(), 28, 40).unwrap());
    assert_eq!(produced.tensor().data(), want.tensor().data(), "zero body == bicubic");
}

#[test]
fn infer_then_measuring_matches_the_eval_path() {
    let dir = tempfile::tempdir().unwrap();
    let hr_dir = dir.path().join("hr");
    let lr_dir = dir.path().join("lr");
    std::fs::create_dir_all(&hr_dir).unwrap();
    std::fs::create_dir_all(&lr_dir).unwrap();
    let hr = texture_image(48, 48, 130);
    write_png(&hr_dir.join("img.png"), &hr).unwrap();
    write_png(&lr_dir.join("img.png"), &bicubic_resize(&hr, 24, 24).unwrap()).unwrap();

    let ckpt = dir.path().join("zero.ckpt");
    make_untrained_ckpt(&ckpt, 1, 8, 2);
    let csv = dir.path().join("eval.csv");
    let (code, _, err) = run(bin()
        .args(["eval", "--checkpoint"])
        .arg(&ckpt)
        .args(["--hr_dir"])
        .arg(&hr_dir)
        .args(["--lr_dir"])
        .arg(&lr_dir)
        .args(["--out_csv"])
        .arg(&csv));
    assert_eq!(code, 0, "{err}");
    let line = std::fs::read_to_string(&csv).unwrap().lines().nth(1).unwrap().to_owned();
    let psnr_eval: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
    let ssim_eval: f64 = line.split(',').nth(2).unwrap().parse().unwrap();

    let sr = dir.path().join("sr.png");
    let (code, _, err) = run(bin()
        .args(["infer", "--checkpoint"])
        .arg(&ckpt)
        .args(["--input"])
        .arg(&lr_dir.join("img.png"))
        .args(["--output"])
        .arg(&sr));
    assert_eq!(code, 0, "{err}");

    let hr_loaded = read_png(&hr_dir.join("img.png")).unwrap();
    let report = MetricReport::measure(
        &rgb_to_y(&hr_loaded).unwrap(),
        &rgb_to_y(&read_png(&sr).unwrap()).unwrap(),
        2,
    )
    .unwrap();
    assert!((report.psnr_db - psnr_eval).abs() <= 1e-9, "{} vs {psnr_eval}", report.psnr_db);
    assert!((report.ssim - ssim_eval).abs() <= 1e-9, "{} vs {ssim_eval}", report.ssim);
}

#[test]
fn bench_rows_satisfy_the_fps_identity() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let (code, out, err) = run(bin()
        .args([
            "bench",
            "--variants",
            "bam,none",
            "--sizes",
            "24x24,32x20",
            "--frames",
            "25",
            "--warmup",
            "5",
            "--blocks",
            "1",
            "--width",
            "8",
            "--out_csv",
        ])
        .arg(&csv));
    assert_eq!(code, 0, "{err}");
    assert!(out.lines().next().unwrap().starts_with("variant size frames"));

    let csv_text = std::fs::read_to_string(&csv).unwrap();
    let mut rows = 0;
    for line in csv_text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let frames: f64 = f[3].parse().unwrap();
        let total: f64 = f[4].parse().unwrap();
        let fps: f64 = f[5].parse().unwrap();
        let median: f64 = f[6].parse().unwrap();
        let p90: f64 = f[7].parse().unwrap();
        assert_eq!(frames, 25.0);
        assert!((fps - frames / total).abs() <= 1e-9 * fps, "fps identity: {line}");
        assert!(median <= p90, "median above p90: {line}");
        rows += 1;
    }
    assert_eq!(rows, 4, "two variants x two sizes");
}

#[test]
fn gradcheck_passes_clean_and_catches_an_injected_fault() {
    let (code, clean_out, err) = run(bin().args(["gradcheck", "--seed", "3"]));
    assert_eq!(code, 0, "clean gradcheck must pass: {err}");
    assert!(clean_out.contains("gradcheck pass"), "{clean_out}");

    let (code, fault_out, err) = run(bin().args([
        "gradcheck",
        "--seed",
        "3",
        "--inject_fault",
        "1e-3",
    ]));
    assert_eq!(code, 1, "fault must flip the exit code");
    assert!(err.contains("bam"), "failure must name the target: {err}");

    // Unaffected targets report identical errors across runs: the check is
    // deterministic in the seed.
    for name in ["gradcheck ca ", "gradcheck se ", "gradcheck cbam ", "gradcheck host "] {
        assert_eq!(grab_line(&clean_out, name), grab_line(&fault_out, name));
    }
}
