use pdlearn::dataio::{encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels, IdxDataset};
use pdlearn::diagnostics::{local_pearson, sample_diagnostics, structure_matrix, DEFAULT_RANK_TOL};
use pdlearn::generators::{softmax, ConvexGenerator, Generator, NormPower};
use pdlearn::netcore::{init_params, jacobian, loss_and_grad, NetworkSpec};
use pdlearn::optim::sgd_step;
use proptest::prelude::*;

fn vec_in(dim: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, dim)
}

fn generator(kind: u8, dim: usize, order: f64, scale: f64) -> Generator {
    match kind % 3 {
        0 => Generator::SquaredL2 { dim },
        1 => Generator::NegEntropySimplex { dim },
        _ => Generator::NormPower { dim, np: NormPower { order, scale } },
    }
}

/// A point in dom(Φ): the simplex for negative entropy, anything otherwise.
fn domain_point(gen: &Generator, raw: &[f64]) -> Vec<f64> {
    match gen {
        Generator::NegEntropySimplex { .. } => softmax(raw),
        _ => raw.to_vec(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fenchel_young_loss_is_nonnegative(
        kind in 0u8..3, (raw, nu) in (2usize..7).prop_flat_map(|d| (vec_in(d, -3.0, 3.0), vec_in(d, -3.0, 3.0))),
        order in 1.2f64..4.0, scale in 0.3f64..3.0,
    ) {
        let gen = generator(kind, raw.len(), order, scale);
        let mu = domain_point(&gen, &raw);
        let d = gen.fy_loss(&mu, &nu).unwrap();
        prop_assert!(d >= -1e-10 * (1.0 + gen.conjugate(&nu).abs()), "d = {d}");
    }

    #[test]
    fn loss_vanishes_at_the_dual_point(
        kind in 0u8..3, raw in (2usize..7).prop_flat_map(|d| vec_in(d, -2.0, 2.0)),
        order in 1.2f64..4.0, scale in 0.3f64..3.0,
    ) {
        let gen = generator(kind, raw.len(), order, scale);
        let mu = domain_point(&gen, &raw);
        let nu = gen.grad_phi(&mu).unwrap();
        let d = gen.fy_loss(&mu, &nu).unwrap();
        prop_assert!(d.abs() <= 1e-9 * (1.0 + gen.conjugate(&nu).abs()), "d = {d}");
    }

    #[test]
    fn norm_power_conjugation_is_an_involution(order in 1.05f64..8.0, scale in 0.05f64..20.0) {
        let np = NormPower::new(order, scale).unwrap();
        let c = np.conjugate();
        prop_assert!((1.0 / np.order + 1.0 / c.order - 1.0).abs() <= 1e-12);
        prop_assert!((np.scale * c.scale - 1.0).abs() <= 1e-12);
        let back = c.conjugate();
        prop_assert!((back.order - order).abs() <= 1e-9 * order);
        prop_assert!((back.scale - scale).abs() <= 1e-9 * scale);
    }

    #[test]
    fn euler_identity_for_norm_powers(
        order in 1.1f64..5.0, scale in 0.2f64..4.0, mu in (1usize..8).prop_flat_map(|d| vec_in(d, -3.0, 3.0)),
    ) {
        let np = NormPower::new(order, scale).unwrap();
        let rv = order * np.eval(&mu);
        prop_assert!(np.euler_residual(&mu) <= 1e-9 * rv.max(1e-300));
    }

    #[test]
    fn conjugate_gradient_matches_finite_differences(
        kind in 0u8..3, nu in (2usize..6).prop_flat_map(|d| vec_in(d, -2.0, 2.0)),
        order in 1.5f64..4.0, scale in 0.5f64..2.0,
    ) {
        let gen = generator(kind, nu.len(), order, scale);
        let g = gen.grad_conjugate(&nu);
        let h = 1e-6;
        for i in 0..nu.len() {
            let (mut up, mut down) = (nu.clone(), nu.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (gen.conjugate(&up) - gen.conjugate(&down)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "coord {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn pearson_coefficients_stay_in_range(
        (a, b) in (3usize..60).prop_flat_map(|n| (vec_in(n, -1e3, 1e3), vec_in(n, -1e3, 1e3))),
        window in 2usize..10,
    ) {
        let w = window.min(a.len());
        for r in local_pearson(&a, &b, w).unwrap().into_iter().flatten() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn gram_identity_and_sample_sandwich(seed in any::<u64>(), y in 0usize..3, x in vec_in(4, -2.0, 2.0)) {
        let spec = NetworkSpec::model_b(4, 3, 6, 2);
        let theta = init_params(&spec, seed, 1.0).unwrap();
        let gen = Generator::NegEntropySimplex { dim: 3 };
        let (_, g, logits) = loss_and_grad(&spec, &theta, &gen, &x, y).unwrap();
        let a = structure_matrix(&jacobian(&spec, &theta, &x).unwrap());
        let mut e = softmax(&logits);
        e[y] -= 1.0;
        let g2: f64 = g.iter().map(|v| v * v).sum();
        prop_assert!((a.quad_form(&e) - g2).abs() <= 1e-10 * g2.max(1e-300));
        let d = sample_diagnostics(&spec, &theta, &gen, &x, y, DEFAULT_RANK_TOL).unwrap();
        if let Some((lo, hi)) = d.bounds {
            prop_assert!(lo - 1e-9 <= d.fitting_error && d.fitting_error <= hi + 1e-9 * hi.max(1.0));
        }
    }

    #[test]
    fn batch_mean_fitting_error_is_below_mean_upper_bound(seed in any::<u64>(), xs in prop::collection::vec(vec_in(3, -2.0, 2.0), 1..12)) {
        let spec = NetworkSpec::model_a(3, 4, 5, 1);
        let theta = init_params(&spec, seed, 1.0).unwrap();
        let gen = Generator::NegEntropySimplex { dim: 4 };
        let (mut fit, mut upper) = (0.0, 0.0);
        for (i, x) in xs.iter().enumerate() {
            let d = sample_diagnostics(&spec, &theta, &gen, x, i % 4, DEFAULT_RANK_TOL).unwrap();
            let Some((_, hi)) = d.bounds else { return Ok(()) };
            fit += d.fitting_error;
            upper += hi;
        }
        prop_assert!(fit <= upper * (1.0 + 1e-12));
    }

    #[test]
    fn sgd_steps_compose_linearly(seed in any::<u64>(), a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let spec = NetworkSpec::model_a(2, 2, 3, 1);
        let theta = init_params(&spec, seed, 1.0).unwrap();
        let g: Vec<f64> = (0..theta.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let two = sgd_step(&sgd_step(&theta, &g, a).unwrap(), &g, b).unwrap();
        let one = sgd_step(&theta, &g, a + b).unwrap();
        for (u, v) in two.values.iter().zip(&one.values) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn idx_encoding_round_trips(n in 1usize..6, rows in 1usize..5, cols in 1usize..5, seed in any::<u8>()) {
        let images: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..rows * cols).map(|p| ((i * 13 + p * 7 + seed as usize) % 256) as f64 / 255.0).collect())
            .collect();
        let labels: Vec<u8> = (0..n).map(|i| ((i + seed as usize) % 10) as u8).collect();
        let ds = IdxDataset { rows, cols, images, labels: labels.clone() };
        let bytes = encode_idx_images(&ds);
        let (count, r, c, pixels) = parse_idx_images(&bytes).unwrap();
        prop_assert_eq!((count, r, c), (n, rows, cols));
        for (i, img) in ds.images.iter().enumerate() {
            for (p, v) in img.iter().enumerate() {
                prop_assert_eq!(pixels[i * rows * cols + p] as f64 / 255.0, *v);
            }
        }
        let encoded = encode_idx_labels(&labels);
        prop_assert_eq!(parse_idx_labels(&encoded).unwrap(), &labels[..]);
    }
}
