//! Trains a small x2 super-resolution network on synthetic textures for a
//! couple of minutes, then scores it against the bicubic baseline on
//! held-out images. Demonstrates the full pipeline: ingestion, five-crop
//! expansion, seeded training with the halving schedule, checkpointing,
//! and luma-channel evaluation.
//!
//! Run with `cargo run --example train_tiny [epochs]` (default 60).

use bam_sr::attention::AttentionKind;
use bam_sr::imageio::{quantize_8bit, write_png};
use bam_sr::metrics::{bicubic_resize, rgb_to_y, Colorspace, Image, MetricReport};
use bam_sr::network::{Insertion, NetworkSpec, SrNetwork};
use bam_sr::pipeline::{
    five_crop_expand, fresh_state, ingest, train, TrainOptions, TrainSpec,
};
use bam_sr::synth::texture_dataset;
use bam_sr::tensor::Var;

fn main() -> bam_sr::Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);

    // Twelve training textures and four held-out ones, written as PNGs so
    // the run goes through the real on-disk ingestion path.
    let scratch = std::env::temp_dir().join("bam_sr_train_tiny");
    let train_dir = scratch.join("train_hr");
    let held_dir = scratch.join("held_hr");
    std::fs::create_dir_all(&train_dir).expect("create scratch directories");
    std::fs::create_dir_all(&held_dir).expect("create scratch directories");
    for (i, img) in texture_dataset(16, 128, 128, 7).iter().enumerate() {
        let dir = if i < 12 { &train_dir } else { &held_dir };
        write_png(&dir.join(format!("tex{i:02}.png")), img)?;
    }

    let dataset = ingest(&train_dir, 2)?;
    let dataset = five_crop_expand(&dataset, 0.6, 32)?;
    let held = ingest(&held_dir, 2)?;
    println!("training pairs after five-crop: {}", dataset.len());

    let spec = NetworkSpec::plain(4, 16, 2)
        .with_attention(AttentionKind::Bam, Insertion::PerBlock);
    let mut net = SrNetwork::<f32>::build(&spec, 11)?;
    let train_spec = TrainSpec {
        patch_size: 32,
        batch: 8,
        epochs,
        seed: 11,
        ..TrainSpec::default()
    };
    let mut state = fresh_state(train_spec.seed);
    let options = TrainOptions {
        csv_path: Some(scratch.join("loss.csv")),
        checkpoint_path: Some(scratch.join("model.ckpt")),
        ..TrainOptions::default()
    };

    println!("training {} epochs (4-block width-16 network, per-block attention)...", epochs);
    let start = std::time::Instant::now();
    let report = train(&mut net, &dataset, &train_spec, &mut state, &options)?;
    println!("done in {:.0}s; loss trace:", start.elapsed().as_secs_f64());
    for record in report.records.iter().step_by((epochs / 8).max(1)) {
        println!("  epoch {:>4}  lr {:.2e}  mean L1 {:.5}", record.epoch, record.lr, record.mean_l1);
    }

    println!("\nheld-out luma PSNR/SSIM (shave 2), network vs bicubic:");
    let net64 = net.cast::<f64>();
    for (i, (lr, hr)) in held.pairs().iter().enumerate() {
        let sr = net64.forward(&Var::constant(lr.tensor().clone()))?;
        let sr = quantize_8bit(&Image::new(sr.value().clone(), Colorspace::Rgb)?);
        let cubic = quantize_8bit(&bicubic_resize(lr, hr.height(), hr.width())?);
        let hr_y = rgb_to_y(hr)?;
        let net_report = MetricReport::measure(&hr_y, &rgb_to_y(&sr)?, 2)?;
        let cubic_report = MetricReport::measure(&hr_y, &rgb_to_y(&cubic)?, 2)?;
        println!(
            "  {:<10} net {}  bicubic {}",
            held.names().get(i).map(String::as_str).unwrap_or("?"),
            net_report.column(),
            cubic_report.column()
        );
    }
    println!("\nloss trace and checkpoint written under {}", scratch.display());
    Ok(())
}
