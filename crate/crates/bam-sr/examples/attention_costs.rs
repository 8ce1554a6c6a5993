//! Prints parameter counts and FLOP budgets for every attention variant at
//! several widths and input sizes, including the per-stage FLOP breakdown
//! that shows where the fused design saves over the sequential one.
//!
//! Run with `cargo run --example attention_costs`.

use bam_sr::attention::{count_flops, count_params, flops_breakdown, AttentionKind, AttentionSpec};
use bam_sr::network::{count_network_flops, count_network_params, Insertion, NetworkSpec};

fn main() {
    println!("parameters per module (reduction 16, spatial kernel 7):");
    println!("  {:<8} {:>8} {:>8} {:>8}", "variant", "16ch", "32ch", "64ch");
    for kind in [AttentionKind::Bam, AttentionKind::Ca, AttentionKind::Se, AttentionKind::Cbam] {
        let row: Vec<String> = [16usize, 32, 64]
            .iter()
            .map(|&n| count_params(&AttentionSpec::new(kind, n)).to_string())
            .collect();
        println!("  {:<8} {:>8} {:>8} {:>8}", kind.to_string(), row[0], row[1], row[2]);
    }

    println!("\nflops per module forward (one multiply-accumulate = 2 flops):");
    println!("  {:<8} {:>14} {:>14}", "variant", "64x64", "240x360");
    for kind in [AttentionKind::Bam, AttentionKind::Ca, AttentionKind::Se, AttentionKind::Cbam] {
        let spec = AttentionSpec::new(kind, 64);
        println!(
            "  {:<8} {:>14} {:>14}",
            kind.to_string(),
            count_flops(&spec, 64, 64),
            count_flops(&spec, 240, 360)
        );
    }

    println!("\nstage-by-stage breakdown at 64 channels, 64x64:");
    for kind in [AttentionKind::Bam, AttentionKind::Cbam] {
        println!("  {kind}:");
        for (stage, flops) in flops_breakdown(&AttentionSpec::new(kind, 64), 64, 64) {
            println!("    {stage:<16} {flops:>12}");
        }
    }

    println!("\nwhole-network cost with per-block insertion (4 blocks, width 16, x2):");
    let base = NetworkSpec::plain(4, 16, 2);
    println!(
        "  {:<10} {:>8} {:>14}",
        "attention", "params", "flops@128x128"
    );
    println!(
        "  {:<10} {:>8} {:>14}",
        "none",
        count_network_params(&base),
        count_network_flops(&base, 128, 128)
    );
    for kind in [AttentionKind::Bam, AttentionKind::Ca, AttentionKind::Se, AttentionKind::Cbam] {
        let spec = base.clone().with_attention(kind, Insertion::PerBlock);
        println!(
            "  {:<10} {:>8} {:>14}",
            kind.to_string(),
            count_network_params(&spec),
            count_network_flops(&spec, 128, 128)
        );
    }
}
