//! Times single-image x2 inference for each attention variant at several
//! input sizes and prints a latency table: total seconds, frames per
//! second, median and 90th-percentile frame times.
//!
//! Run with `cargo run --example inference_speed` (about a minute), or pass
//! a frame count: `cargo run --example inference_speed 50`.

use bam_sr::attention::AttentionKind;
use bam_sr::bench::{run_bench, BenchConfig};

fn main() -> bam_sr::Result<()> {
    let frames: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(30);

    let config = BenchConfig {
        variants: vec![
            AttentionKind::Bam,
            AttentionKind::Ca,
            AttentionKind::Se,
            AttentionKind::Cbam,
        ],
        sizes: vec![(64, 64), (128, 128)],
        frames,
        warmup: 5,
        blocks: 2,
        width: 16,
        scale: 2,
        seed: 0,
    };
    println!(
        "timing {} frames per row (2-block width-16 host, x2 upscale, single thread)...\n",
        frames
    );
    let reports = run_bench(&config)?;

    println!(
        "{:<8} {:>9} {:>8} {:>9} {:>10} {:>10}",
        "variant", "input", "frames", "fps", "median_ms", "p90_ms"
    );
    for r in &reports {
        println!(
            "{:<8} {:>9} {:>8} {:>9.2} {:>10.3} {:>10.3}",
            r.kind.to_string(),
            format!("{}x{}", r.input.0, r.input.1),
            r.frames,
            r.fps,
            r.median_ms,
            r.p90_ms
        );
    }

    // The fused design pays for one pooled 1x1 bottleneck and one 7x7
    // single-channel convolution; the sequential design adds a second pooled
    // pass and a two-channel spatial stage, which shows up as a higher
    // median at every size.
    for size in [(64usize, 64usize), (128, 128)] {
        let b = reports.iter().find(|r| r.kind == AttentionKind::Bam && r.input == size);
        let c = reports.iter().find(|r| r.kind == AttentionKind::Cbam && r.input == size);
        if let (Some(b), Some(c)) = (b, c) {
            println!(
                "\nat {}x{}: fused median {:.3} ms vs sequential {:.3} ms ({:+.1}%)",
                size.0,
                size.1,
                b.median_ms,
                c.median_ms,
                (b.median_ms / c.median_ms - 1.0) * 100.0
            );
        }
    }
    Ok(())
}
