//! Peeks inside the fused attention module: runs a feature map through the
//! channel branch and the spatial branch separately, prints both gates, and
//! verifies the module's output is exactly their broadcast product with the
//! input — every element attenuated, never amplified.
//!
//! Run with `cargo run --example attention_maps`.

use bam_sr::attention::{AttentionKind, AttentionModule, AttentionSpec};
use bam_sr::params::ParamSet;
use bam_sr::tensor::{Shape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bam_sr::Result<()> {
    let channels = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let module =
        AttentionModule::<f64>::new(AttentionSpec::new(AttentionKind::Bam, channels), "", &mut rng)?;

    let features = Var::constant(Tensor::rand_uniform(
        Shape::new(1, channels, 6, 6),
        -1.0,
        1.0,
        &mut rng,
    ));

    // The two gates, evaluated on their own.
    let channel_gate = module.acam_forward(&features)?;
    let spatial_gate = module.msam_forward(&features)?;

    println!("channel gate (one weight per channel, pooled globally):");
    for c in 0..channels {
        let w = channel_gate.value().at(0, c, 0, 0);
        let bar = "#".repeat((w * 40.0).round() as usize);
        println!("  ch{c}: {w:.4} {bar}");
    }

    println!("\nspatial gate (one weight per pixel, channels pooled by max):");
    for y in 0..6 {
        let row: Vec<String> = (0..6)
            .map(|x| format!("{:.3}", spatial_gate.value().at(0, 0, y, x)))
            .collect();
        println!("  {}", row.join(" "));
    }

    // The module output is the three-way elementwise product
    // gate_c x gate_s x features, with both gates broadcast.
    let out = module.forward(&features)?;
    let mut worst = 0.0f64;
    for c in 0..channels {
        for y in 0..6 {
            for x in 0..6 {
                let expect = channel_gate.value().at(0, c, 0, 0)
                    * spatial_gate.value().at(0, 0, y, x)
                    * features.value().at(0, c, y, x);
                worst = worst.max((out.value().at(0, c, y, x) - expect).abs());
            }
        }
    }
    println!("\nmodule output vs explicit gate product: max deviation {worst:.1e}");
    assert!(worst <= 1e-12);

    let attenuated = out
        .value()
        .data()
        .iter()
        .zip(features.value().data())
        .all(|(o, f)| o.abs() <= f.abs());
    println!("every element attenuated (|out| <= |in|): {attenuated}");
    assert!(attenuated);

    // Both gates sit strictly inside (0,1), so zeroing all weights lands on
    // sigmoid(0) = 1/2 per gate: the module becomes a constant quarter.
    let mut zeroed =
        AttentionModule::<f64>::new(AttentionSpec::new(AttentionKind::Bam, channels), "", &mut rng)?;
    zeroed.zero_params();
    let quartered = zeroed.forward(&features)?;
    let ratio = quartered.value().at(0, 0, 2, 3) / features.value().at(0, 0, 2, 3);
    println!("with all weights zeroed the module scales by exactly {ratio}");
    assert_eq!(ratio, 0.25);
    Ok(())
}
