use proptest::prelude::*;
use rand::Rng;
use semiblind_core::degradation::{
    disk_coverage, make_disk_kernel, make_gaussian_kernel, make_motion_kernel, realize, simulate_blur, true_residual,
    KernelSpec,
};
use semiblind_core::rng;
use semiblind_core::signal::{conv2d_direct, Image};
use semiblind_core::Kernel;

fn transpose(k: &Kernel) -> Vec<f64> {
    let (h, w) = (k.height(), k.width());
    let mut t = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            t[j * h + i] = k.weights()[i * w + j];
        }
    }
    t
}

fn entropy(k: &Kernel) -> f64 {
    k.weights().iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

fn random_image(n: usize, seed: u64) -> Image {
    let mut r = rng::stream(seed, 940);
    Image::gray(n, n, (0..n * n).map(|_| r.gen_range(0.0..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn motion_90_is_transpose_of_0(len in 1.0f64..25.0) {
        let a = make_motion_kernel(len, 0.0).unwrap();
        let b = make_motion_kernel(len, 90.0).unwrap();
        // Angle is counter-clockwise with y pointing down, so 90° is the
        // vertical line through the centre: the transpose of the horizontal one.
        let t = transpose(&a);
        for (x, y) in b.weights().iter().zip(&t) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn kernels_are_normalized_and_nonnegative(
        len in 1.0f64..30.0, angle in -180.0f64..180.0, sigma in 0.2f64..6.0, radius in 0.3f64..8.0
    ) {
        for k in [
            make_motion_kernel(len, angle).unwrap(),
            make_gaussian_kernel(15, sigma).unwrap(),
            make_disk_kernel(radius).unwrap(),
        ] {
            prop_assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(k.weights().iter().all(|&w| w >= 0.0));
            prop_assert!(k.height() % 2 == 1 && k.width() % 2 == 1);
        }
    }

    #[test]
    fn gaussian_is_isotropic(size in 3usize..15, sigma in 0.3f64..4.0) {
        let k = make_gaussian_kernel(size, sigma).unwrap();
        let n = k.width();
        let w = k.weights();
        for i in 0..n {
            for j in 0..n {
                let v = w[i * n + j];
                prop_assert!((v - w[i * n + (n - 1 - j)]).abs() < 1e-15);
                prop_assert!((v - w[(n - 1 - i) * n + j]).abs() < 1e-15);
                prop_assert!((v - w[j * n + i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn residual_is_difference_of_blurs(seed in 0u64..500, s1 in 0.5f64..3.0, s2 in 0.5f64..3.0) {
        let x = random_image(16, seed);
        let k1 = make_gaussian_kernel(7, s1).unwrap();
        let k2 = make_gaussian_kernel(5, s2).unwrap();
        let r = true_residual(&x, &k1, &k2).unwrap();
        let a = conv2d_direct(&x, &k1).unwrap();
        let b = conv2d_direct(&x, &k2).unwrap();
        for i in 0..r.data().len() {
            prop_assert!((r.data()[i] - (a.data()[i] - b.data()[i])).abs() < 1e-10);
        }
    }
}

#[test]
fn gaussian_center_weight_matches_formula() {
    let k = make_gaussian_kernel(5, 1.0).unwrap();
    let z: f64 = (-2..=2)
        .flat_map(|i| (-2..=2).map(move |j| (-((i * i + j * j) as f64) / 2.0).exp()))
        .sum();
    assert!((k.weights()[12] - 1.0 / z).abs() < 1e-15);
}

#[test]
fn disk_area_is_close_to_pi_r_squared() {
    let area: f64 = disk_coverage(4.0).unwrap().weights().iter().sum();
    let want = std::f64::consts::PI * 16.0;
    assert!((area - want).abs() / want < 0.02, "area {area}");
}

#[test]
fn biased_kernels() {
    let m = KernelSpec::Motion { length: 20.0, angle: 10.0 };
    assert_eq!(realize(&m, &[0.0, 0.0]).unwrap(), make_motion_kernel(20.0, 10.0).unwrap());

    let g = KernelSpec::Gaussian { size: 20.0, sigma: 4.0 };
    assert!(entropy(&realize(&g, &[0.0, 0.5]).unwrap()) > entropy(&g.realize().unwrap()));

    let d = KernelSpec::Disk { radius: 4.0 };
    let full = d.realize().unwrap();
    let small = realize(&d, &[-1.0]).unwrap().pad_to(full.height(), full.width()).unwrap();
    let inside = small.weights().iter().zip(full.weights()).all(|(s, f)| *s == 0.0 || *f > 0.0);
    let strictly = small.weights().iter().filter(|&&s| s > 0.0).count() < full.weights().iter().filter(|&&f| f > 0.0).count();
    assert!(inside && strictly);
}

#[test]
fn noise_has_half_normal_mean_and_is_reproducible() {
    let x = random_image(128, 1);
    let k = make_gaussian_kernel(5, 1.0).unwrap();
    let clean = conv2d_direct(&x, &k).unwrap();
    let y = simulate_blur(&x, &k, 0.01, 3).unwrap();
    let mean_abs: f64 =
        y.data().iter().zip(clean.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.data().len() as f64;
    let want = 0.01 * (2.0 / std::f64::consts::PI).sqrt();
    assert!((mean_abs - want).abs() / want < 0.05, "mean |n| {mean_abs}");
    assert_eq!(y, simulate_blur(&x, &k, 0.01, 3).unwrap());
    assert_ne!(y, simulate_blur(&x, &k, 0.01, 4).unwrap());
}

#[test]
fn residual_of_constant_image_vanishes() {
    let x = Image::filled(1, 16, 16, 0.6);
    let r = true_residual(&x, &make_gaussian_kernel(9, 2.0).unwrap(), &make_disk_kernel(3.0).unwrap()).unwrap();
    assert!(r.data().iter().all(|v| v.abs() < 1e-14));
}
