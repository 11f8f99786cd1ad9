use rand::Rng;
use semiblind_core::networks::{build_net, sample_noise_input, NetConfig, Network};
use semiblind_core::rng;
use semiblind_core::tensor::{relative_error, Graph};
use semiblind_core::Tensor;

fn small(cfg: NetConfig) -> NetConfig {
    cfg.with_widths(&[8, 16], 2)
}

fn output(net: &Network) -> Tensor {
    let mut g = Graph::new();
    let o = net.forward(&mut g).unwrap();
    g.value(o.output).clone()
}

fn mean_output(net: &Network) -> f64 {
    let t = output(net);
    t.sum() / t.len() as f64
}

#[test]
fn noise_input_statistics() {
    let a = sample_noise_input(32, 64, 64, 0.1, 1).unwrap();
    assert_eq!(a, sample_noise_input(32, 64, 64, 0.1, 1).unwrap());
    let n = a.len() as f64;
    let mean = a.sum() / n;
    let std = (a.sum_squares() / n - mean * mean).sqrt();
    assert!((std - 0.1).abs() < 0.003, "std {std}");

    let b = sample_noise_input(32, 64, 64, 0.1, 2).unwrap();
    let corr = a.dot(&b).unwrap() / (a.sum_squares() * b.sum_squares()).sqrt();
    assert!(corr.abs() < 0.05, "corr {corr}");
}

#[test]
fn residual_head_produces_exact_zeros() {
    let net = build_net(small(NetConfig::residual(1, 5)), 32, 32).unwrap();
    let out = output(&net);
    let zeros = out.data().iter().filter(|&&v| v == 0.0).count();
    assert!(zeros > 0, "no exact zeros in {} outputs", out.len());
}

#[test]
fn sigmoid_head_is_inside_unit_interval_and_varies_across_seeds() {
    for seed in 0..10 {
        let net = build_net(NetConfig::image(1, seed), 32, 32).unwrap();
        let out = output(&net);
        assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let n = out.len() as f64;
        let mean = out.sum() / n;
        let std = (out.sum_squares() / n - mean * mean).sqrt();
        assert!(mean > 0.1 && mean < 0.9, "seed {seed}: mean {mean}");
        assert!(std > 1e-3, "seed {seed}: flat output");
    }
}

#[test]
fn output_layer_is_live() {
    let net = build_net(small(NetConfig::image(1, 3)), 16, 16).unwrap();
    let idx = net.param_names().iter().position(|n| n == "out.weight").unwrap();
    let before = output(&net);
    let mut doubled = net.clone();
    let w = doubled.params()[idx].map(|v| 2.0 * v);
    doubled.params_mut()[idx] = w;
    assert_ne!(before, output(&doubled));
}

#[test]
fn mean_output_gradient_matches_finite_differences() {
    for cfg in [NetConfig::image(1, 11), NetConfig::residual(1, 12)] {
        let net = build_net(small(cfg), 16, 16).unwrap();
        let mut g = Graph::new();
        let o = net.forward(&mut g).unwrap();
        let m = g.mean(o.output).unwrap();
        let grads = g.backward(m).unwrap();
        let mut r = rng::stream(4, 920);
        let mut checked = 0;
        let mut tries = 0;
        while checked < 5 {
            tries += 1;
            assert!(tries < 500, "too few influential weights");
            let pi = r.gen_range(0..net.params().len());
            let ci = r.gen_range(0..net.params()[pi].len());
            let analytic = grads.wrt(o.params[pi]).data()[ci];
            let h = 1e-6;
            let probe = |d: f64| {
                let mut n = net.clone();
                n.params_mut()[pi].data_mut()[ci] += d;
                mean_output(&n)
            };
            let numeric = (probe(h) - probe(-h)) / (2.0 * h);
            if analytic.abs() < 1e-6 && numeric.abs() < 1e-6 {
                continue;
            }
            let e = relative_error(analytic, numeric);
            assert!(e < 1e-3, "{}[{ci}]: analytic {analytic} numeric {numeric}", net.param_names()[pi]);
            checked += 1;
        }
    }
}

#[test]
fn parameter_set_is_seed_determined() {
    let a = build_net(small(NetConfig::image(1, 9)), 16, 16).unwrap();
    let b = build_net(small(NetConfig::image(1, 9)), 16, 16).unwrap();
    let c = build_net(small(NetConfig::image(1, 10)), 16, 16).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.params(), c.params());
    assert!(build_net(small(NetConfig::image(1, 9)), 18, 16).is_err());
}

#[test]
fn coarse_output_is_blockwise_constant_with_nearest_upsampling() {
    let mut cfg = NetConfig::residual(1, 21).with_widths(&[4, 8], 0);
    cfg.upsample = semiblind_core::tensor::Upsample::Nearest;
    assert_eq!(cfg.coarse_output_levels, 1);
    let net = build_net(cfg.clone(), 16, 16).unwrap();
    let mut g = Graph::new();
    let o = net.forward(&mut g).unwrap();
    let pre = g.value(o.pre_head).clone();
    assert_eq!(pre.shape(), &[1, 16, 16]);
    let d = pre.data();
    for i in 0..16 {
        for j in 0..16 {
            assert_eq!(d[i * 16 + j], d[(i & !1) * 16 + (j & !1)]);
        }
    }
    let mut full = cfg.clone();
    full.coarse_output_levels = 0;
    let other = build_net(full, 16, 16).unwrap();
    assert_ne!(output(&other), output(&net));

    let mut bad = cfg;
    bad.skip_channels = vec![2, 2];
    assert!(build_net(bad, 16, 16).is_err());
}
