//! Verifies the reverse-mode gradients of every attention variant and of a
//! small host network against central finite differences in double
//! precision, then deliberately corrupts one gradient coordinate to show
//! the checker catching it.
//!
//! Run with `cargo run --example gradient_check`.

use bam_sr::attention::{AttentionKind, AttentionModule, AttentionSpec};
use bam_sr::network::{Insertion, NetworkSpec, SrNetwork};
use bam_sr::params::grad_check_parameters;
use bam_sr::tensor::{grad_check, grad_check_with_injected_fault, Shape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bam_sr::Result<()> {
    let step = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    println!("input-gradient checks (worst relative error vs finite differences):");
    for kind in [AttentionKind::Bam, AttentionKind::Ca, AttentionKind::Se, AttentionKind::Cbam] {
        let module = AttentionModule::<f64>::new(AttentionSpec::new(kind, 8), "", &mut rng)?;
        let input = Tensor::rand_uniform(Shape::new(2, 8, 12, 10), 0.0, 1.0, &mut rng);
        let worst = grad_check(|x| Ok(module.forward(x)?.sum()), &input, step)?;
        println!("  {kind:<5} {worst:.3e}");
    }

    let host = NetworkSpec::plain(1, 8, 2).with_attention(AttentionKind::Bam, Insertion::PerBlock);
    let net = SrNetwork::<f64>::build(&host, 0)?;
    let input = Tensor::rand_uniform(Shape::new(2, 3, 12, 10), 0.0, 1.0, &mut rng);
    let worst = grad_check(|x| Ok(net.forward(x)?.sum()), &input, step)?;
    println!("  host  {worst:.3e}  (1 residual block, width 8, x2 upscale)");

    println!("\nparameter-gradient check over one fused module, weight by weight:");
    let mut module =
        AttentionModule::<f64>::new(AttentionSpec::new(AttentionKind::Bam, 8), "", &mut rng)?;
    let probe = Var::constant(Tensor::rand_uniform(Shape::new(2, 8, 12, 10), 0.0, 1.0, &mut rng));
    let results = grad_check_parameters(&mut module, |m| Ok(m.forward(&probe)?.sum()), step)?;
    for r in &results {
        println!("  {:<18} {:.3e}", r.name, r.worst_rel_error);
    }

    // A checker that cannot fail proves nothing: corrupt the first reverse-mode
    // gradient coordinate by 1e-3 and watch the error jump past tolerance.
    let module = AttentionModule::<f64>::new(AttentionSpec::new(AttentionKind::Bam, 8), "", &mut rng)?;
    let input = Tensor::rand_uniform(Shape::new(2, 8, 12, 10), 0.0, 1.0, &mut rng);
    let corrupted = grad_check_with_injected_fault(
        |x| Ok(module.forward(x)?.sum()),
        &input,
        step,
        1e-3,
    )?;
    println!("\nwith a deliberate 1e-3 fault injected: worst error {corrupted:.3e} (should be far above 1e-5)");
    assert!(corrupted > 1e-5, "the injected fault must be detected");
    Ok(())
}
