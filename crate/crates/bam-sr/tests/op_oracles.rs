//! Forward results of every tensor operation checked against independent
//! brute-force references written directly from the definitions.

use bam_sr::tensor::{broadcast_hadamard, l1_loss, Shape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn assert_close(got: &Tensor<f64>, want: &Tensor<f64>, tol: f64, what: &str) {
    assert_eq!(got.shape(), want.shape(), "{what}: shape");
    for (i, (g, w)) in got.data().iter().zip(want.data()).enumerate() {
        let denom = g.abs().max(w.abs()).max(1e-12);
        assert!(
            (g - w).abs() / denom <= tol,
            "{what}: element {i}: got {g}, want {w}"
        );
    }
}

/// Direct quintuple-loop convolution: out[n,o,y,x] = bias[o] +
/// sum_{c,i,j} in[n,c,y+i-p,x+j-p] * w[o,c,i,j], zero outside the input.
fn conv_reference(
    input: &Tensor<f64>,
    weight: &Tensor<f64>,
    bias: &Tensor<f64>,
    padding: usize,
) -> Tensor<f64> {
    let xs = input.shape();
    let ws = weight.shape();
    let (oh, ow) = (xs.h + 2 * padding - ws.h + 1, xs.w + 2 * padding - ws.w + 1);
    Tensor::from_fn(Shape::new(xs.n, ws.n, oh, ow), |n, o, y, x| {
        let mut acc = bias.at(0, o, 0, 0);
        for c in 0..xs.c {
            for i in 0..ws.h {
                for j in 0..ws.w {
                    let yy = y + i;
                    let xx = x + j;
                    if yy >= padding && xx >= padding {
                        let (yy, xx) = (yy - padding, xx - padding);
                        if yy < xs.h && xx < xs.w {
                            acc += input.at(n, c, yy, xx) * weight.at(o, c, i, j);
                        }
                    }
                }
            }
        }
        acc
    })
}

#[test]
fn convolution_matches_quintuple_loop_reference() {
    let mut r = rng(11);
    // The fixed published example: 2x3x5x4 input, 2x3x3x3 weight, padding 1.
    let input = Tensor::rand_uniform(Shape::new(2, 3, 5, 4), -1.0, 1.0, &mut r);
    let weight = Tensor::rand_uniform(Shape::new(2, 3, 3, 3), -1.0, 1.0, &mut r);
    let bias = Tensor::rand_uniform(Shape::new(1, 2, 1, 1), -1.0, 1.0, &mut r);
    let out = Var::constant(input.clone())
        .conv2d(&Var::constant(weight.clone()), &Var::constant(bias.clone()), 1)
        .unwrap();
    assert_close(
        out.value(),
        &conv_reference(&input, &weight, &bias, 1),
        1e-12,
        "fixed conv",
    );
}

#[test]
fn convolution_matches_reference_on_random_geometry() {
    let mut r = rng(12);
    for trial in 0..120 {
        let (n, cin, cout) = (r.gen_range(1..3), r.gen_range(1..5), r.gen_range(1..5));
        let k = [1usize, 3, 5, 7][r.gen_range(0..4)];
        let padding = r.gen_range(0..=(k / 2 + 1));
        let h = r.gen_range(k.saturating_sub(2 * padding).max(1)..k + 6);
        let w = r.gen_range(k.saturating_sub(2 * padding).max(1)..k + 6);
        if h + 2 * padding < k || w + 2 * padding < k {
            continue;
        }
        let input = Tensor::rand_uniform(Shape::new(n, cin, h, w), -1.0, 1.0, &mut r);
        let weight = Tensor::rand_uniform(Shape::new(cout, cin, k, k), -1.0, 1.0, &mut r);
        let bias = Tensor::rand_uniform(Shape::new(1, cout, 1, 1), -1.0, 1.0, &mut r);
        let out = Var::constant(input.clone())
            .conv2d(&Var::constant(weight.clone()), &Var::constant(bias.clone()), padding)
            .unwrap();
        assert_close(
            out.value(),
            &conv_reference(&input, &weight, &bias, padding),
            1e-12,
            &format!("conv trial {trial}"),
        );
    }
}

#[test]
fn pools_match_loop_references() {
    let mut r = rng(13);
    for _ in 0..40 {
        let s = Shape::new(r.gen_range(1..3), r.gen_range(1..6), r.gen_range(1..7), r.gen_range(1..7));
        let x = Tensor::rand_uniform(s, -1.0, 1.0, &mut r);
        let v = Var::constant(x.clone());

        let gap = Tensor::from_fn(Shape::new(s.n, s.c, 1, 1), |n, c, _, _| {
            let mut acc = 0.0;
            for y in 0..s.h {
                for xx in 0..s.w {
                    acc += x.at(n, c, y, xx);
                }
            }
            acc / (s.h * s.w) as f64
        });
        assert_close(v.global_avg_pool().value(), &gap, 1e-12, "global_avg_pool");

        let gmp = Tensor::from_fn(Shape::new(s.n, s.c, 1, 1), |n, c, _, _| {
            let mut m = f64::NEG_INFINITY;
            for y in 0..s.h {
                for xx in 0..s.w {
                    m = m.max(x.at(n, c, y, xx));
                }
            }
            m
        });
        assert_close(v.global_max_pool().value(), &gmp, 0.0, "global_max_pool");

        let cmp_ = Tensor::from_fn(Shape::new(s.n, 1, s.h, s.w), |n, _, y, xx| {
            (0..s.c).map(|c| x.at(n, c, y, xx)).fold(f64::NEG_INFINITY, f64::max)
        });
        assert_close(v.channel_max_pool().value(), &cmp_, 0.0, "channel_max_pool");

        let cmean = Tensor::from_fn(Shape::new(s.n, 1, s.h, s.w), |n, _, y, xx| {
            (0..s.c).map(|c| x.at(n, c, y, xx)).sum::<f64>() / s.c as f64
        });
        assert_close(v.channel_mean_pool().value(), &cmean, 1e-12, "channel_mean_pool");
    }
}

#[test]
fn elementwise_ops_match_definitions() {
    let mut r = rng(14);
    let s = Shape::new(2, 3, 4, 5);
    let x = Tensor::rand_uniform(s, -2.0, 2.0, &mut r);
    let v = Var::constant(x.clone());

    assert_close(&v.relu().value().clone(), &x.map(|a| a.max(0.0)), 0.0, "relu");
    assert_close(
        v.sigmoid().value(),
        &x.map(|a| 1.0 / (1.0 + (-a).exp())),
        1e-15,
        "sigmoid",
    );

    let slope = Tensor::rand_uniform(Shape::new(1, s.c, 1, 1), 0.0, 1.0, &mut r);
    let pre = v.prelu(&Var::constant(slope.clone())).unwrap();
    let want = Tensor::from_fn(s, |n, c, h, w| {
        let a = x.at(n, c, h, w);
        if a >= 0.0 { a } else { slope.at(0, c, 0, 0) * a }
    });
    assert_close(pre.value(), &want, 0.0, "prelu");

    let y = Tensor::rand_uniform(s, -2.0, 2.0, &mut r);
    let vy = Var::constant(y.clone());
    assert_close(
        v.add(&vy).unwrap().value(),
        &Tensor::from_fn(s, |n, c, h, w| x.at(n, c, h, w) + y.at(n, c, h, w)),
        0.0,
        "add",
    );
    assert_close(
        v.sub(&vy).unwrap().value(),
        &Tensor::from_fn(s, |n, c, h, w| x.at(n, c, h, w) - y.at(n, c, h, w)),
        0.0,
        "sub",
    );
    assert_close(
        v.mul(&vy).unwrap().value(),
        &Tensor::from_fn(s, |n, c, h, w| x.at(n, c, h, w) * y.at(n, c, h, w)),
        0.0,
        "mul",
    );
    assert_close(v.scale(2.5).value(), &x.map(|a| 2.5 * a), 0.0, "scale");
}

#[test]
fn l1_matches_double_loop() {
    let mut r = rng(15);
    let s = Shape::new(2, 3, 6, 5);
    let a = Tensor::<f64>::rand_uniform(s, -1.0, 1.0, &mut r);
    let b = Tensor::rand_uniform(s, -1.0, 1.0, &mut r);
    let got = l1_loss(&Var::constant(a.clone()), &Var::constant(b.clone()))
        .unwrap()
        .scalar_value()
        .unwrap();
    let mut acc = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        acc += (x - y).abs();
    }
    let want = acc / s.count() as f64;
    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "l1 {got} vs {want}");
}

#[test]
fn scale_channels_and_spatial_match_broadcast_loops() {
    let mut r = rng(16);
    let s = Shape::new(2, 4, 5, 3);
    let f = Tensor::rand_uniform(s, -1.0, 1.0, &mut r);
    let ch = Tensor::rand_uniform(Shape::new(s.n, s.c, 1, 1), 0.0, 1.0, &mut r);
    let sp = Tensor::rand_uniform(Shape::new(s.n, 1, s.h, s.w), 0.0, 1.0, &mut r);
    let vf = Var::constant(f.clone());

    assert_close(
        vf.scale_channels(&Var::constant(ch.clone())).unwrap().value(),
        &Tensor::from_fn(s, |n, c, h, w| f.at(n, c, h, w) * ch.at(n, c, 0, 0)),
        0.0,
        "scale_channels",
    );
    assert_close(
        vf.scale_spatial(&Var::constant(sp.clone())).unwrap().value(),
        &Tensor::from_fn(s, |n, c, h, w| f.at(n, c, h, w) * sp.at(n, 0, h, w)),
        0.0,
        "scale_spatial",
    );
    assert_close(
        broadcast_hadamard(&Var::constant(ch.clone()), &Var::constant(sp.clone()), &vf)
            .unwrap()
            .value(),
        &Tensor::from_fn(s, |n, c, h, w| ch.at(n, c, 0, 0) * sp.at(n, 0, h, w) * f.at(n, c, h, w)),
        0.0,
        "broadcast_hadamard",
    );
}

#[test]
fn fused_product_equals_two_sequential_scalings() {
    // One three-factor broadcast product must agree exactly with applying the
    // channel weights and the spatial weights one after the other.
    let mut r = rng(17);
    let s = Shape::new(2, 5, 4, 6);
    let f = Var::constant(Tensor::rand_uniform(s, -1.0, 1.0, &mut r));
    let ch = Var::constant(Tensor::rand_uniform(Shape::new(s.n, s.c, 1, 1), 0.0, 1.0, &mut r));
    let sp = Var::constant(Tensor::rand_uniform(Shape::new(s.n, 1, s.h, s.w), 0.0, 1.0, &mut r));
    let fused = broadcast_hadamard(&ch, &sp, &f).unwrap();
    let sequential = f.scale_channels(&ch).unwrap().scale_spatial(&sp).unwrap();
    assert_close(fused.value(), sequential.value(), 1e-15, "fused vs sequential");
}

#[test]
fn pixel_shuffle_matches_index_formula() {
    let mut r = rng(18);
    for &(c_out, s_factor, h, w) in
        &[(1usize, 2usize, 2usize, 2usize), (1, 3, 3, 3), (2, 2, 3, 4), (3, 3, 2, 5), (4, 2, 1, 1)]
    {
        let cin = c_out * s_factor * s_factor;
        let x = Tensor::rand_uniform(Shape::new(2, cin, h, w), -1.0, 1.0, &mut r);
        let out = Var::constant(x.clone()).pixel_shuffle(s_factor).unwrap();
        let want = Tensor::from_fn(
            Shape::new(2, c_out, s_factor * h, s_factor * w),
            |n, c, y, xx| {
                let (hy, i) = (y / s_factor, y % s_factor);
                let (wx, j) = (xx / s_factor, xx % s_factor);
                x.at(n, c * s_factor * s_factor + i * s_factor + j, hy, wx)
            },
        );
        assert_close(out.value(), &want, 0.0, &format!("pixel_shuffle s={s_factor}"));
    }
}

#[test]
fn pixel_shuffle_factor_one_is_identity() {
    let mut r = rng(19);
    let x = Tensor::rand_uniform(Shape::new(2, 3, 4, 5), -1.0, 1.0, &mut r);
    let out = Var::constant(x.clone()).pixel_shuffle(1).unwrap();
    assert_close(out.value(), &x, 0.0, "pixel_shuffle identity");
}

#[test]
fn pixel_shuffle_round_trips_through_unshuffle() {
    let mut r = rng(20);
    for factor in [2usize, 3, 4] {
        let x = Tensor::rand_uniform(Shape::new(2, 2 * factor * factor, 3, 4), -1.0, 1.0, &mut r);
        let shuffled = Var::constant(x.clone()).pixel_shuffle(factor).unwrap();
        let back = shuffled.value().pixel_unshuffle(factor).unwrap();
        assert_close(&back, &x, 0.0, &format!("unshuffle factor {factor}"));
    }
}

#[test]
fn pixel_shuffle_rejects_bad_channel_count() {
    let x = Tensor::<f64>::zeros(Shape::new(1, 6, 2, 2));
    assert!(Var::constant(x).pixel_shuffle(2).is_err());
}

#[test]
fn concat_stacks_channels_in_order() {
    let mut r = rng(21);
    let a = Tensor::rand_uniform(Shape::new(2, 2, 3, 4), -1.0, 1.0, &mut r);
    let b = Tensor::rand_uniform(Shape::new(2, 3, 3, 4), -1.0, 1.0, &mut r);
    let out = Var::constant(a.clone()).concat_channels(&Var::constant(b.clone())).unwrap();
    let want = Tensor::from_fn(Shape::new(2, 5, 3, 4), |n, c, h, w| {
        if c < 2 { a.at(n, c, h, w) } else { b.at(n, c - 2, h, w) }
    });
    assert_close(out.value(), &want, 0.0, "concat_channels");
}

#[test]
fn upscale_is_exactly_the_shared_resampling_core() {
    // The differentiable upscale and the standalone resampler must be the
    // same arithmetic, bit for bit: the zero-initialized network relies on
    // its global skip matching the plain resize.
    let mut r = rng(22);
    for factor in [2usize, 3, 4] {
        let x = Tensor::rand_uniform(Shape::new(1, 3, 7, 5), 0.0, 1.0, &mut r);
        let via_graph = Var::constant(x.clone()).bicubic_upscale(factor).unwrap();
        let direct = bam_sr::resample::resize_tensor(&x, 7 * factor, 5 * factor);
        assert_close(via_graph.value(), &direct, 0.0, &format!("upscale x{factor}"));
    }
}
