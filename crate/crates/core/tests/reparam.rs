use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use signlab::harness::rng_for;
use signlab::reparam::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn split_examples() {
    let (m, w) = split_init(&[0.0], 2.0).unwrap();
    assert!(close(m[0], 2f64.sqrt(), 1e-15) && w[0] == 0.0);

    let (m, w) = split_init(&[0.75, -0.75], 1.0).unwrap();
    // Independent oracle: m² is the positive root of t² − βt − x² = 0.
    let m_expect = ((1.0 + (1.0f64 + 4.0 * 0.5625).sqrt()) / 2.0).sqrt();
    assert!(close(m[0], m_expect, 1e-12) && close(m[0], 1.183803, 1e-6));
    assert!(close(w[0], 0.633552, 1e-6));
    assert!(close(m[1], m[0], 0.0) && close(w[1], -w[0], 0.0));
    assert!(close(m[0] * w[0], 0.75, 1e-12) && close(m[0] * m[0] - w[0] * w[0], 1.0, 1e-10));

    assert!(split_init(&[1.0], 0.0).is_err());
    assert!(split_init(&[1.0], -1.0).is_err());
    assert!(split_init(&[f64::NAN], 1.0).is_err());
}

#[test]
fn merge_and_mask() {
    let l = SignInLayer::from_factors(vec![2], vec![2.0, 3.0], vec![0.5, 7.0], vec![true, false], 1.0).unwrap();
    assert_eq!(merge(&l), vec![1.0, 0.0]);
}

#[test]
fn rescale_examples() {
    let l = SignInLayer::from_factors(vec![1], vec![2.0], vec![0.5], vec![true], 1.0).unwrap();
    let r = rescale(&l);
    assert!(close(r.m[0], 1.272020, 1e-6) && close(r.w[0], 0.786151, 1e-6));
    assert!(close(r.m[0] * r.w[0], 1.0, 1e-12) && close(r.balance()[0], 1.0, 1e-10));

    let l = SignInLayer::from_factors(vec![1], vec![1.0], vec![-1.0], vec![true], 2.0).unwrap();
    let r = rescale(&l);
    assert!(close(merge(&r)[0], -1.0, 1e-12) && close(r.balance()[0], 2.0, 1e-10));

    // Masked coordinates keep their mask through a rescale.
    let l = SignInLayer::from_factors(vec![2], vec![1.0, 1.0], vec![1.0, 1.0], vec![true, false], 1.0).unwrap();
    assert_eq!(rescale(&l).mask(), &[true, false]);
}

#[test]
fn reparam_grad_examples() {
    let l = SignInLayer::from_factors(vec![2], vec![2.0, 2.0], vec![0.5, 0.5], vec![true, false], 1.0).unwrap();
    let (gm, gw) = reparam_grads(&l, &[1.0, 1.0]).unwrap();
    assert_eq!((gm, gw), (vec![0.5, 0.0], vec![2.0, 0.0]));
}

#[test]
fn frobenius_decay_examples_and_finite_differences() {
    let l = SignInLayer::from_factors(vec![1], vec![1.0], vec![1.0], vec![true], 1.0).unwrap();
    assert_eq!(frobenius_decay_grads(&l, 0.5).unwrap(), (vec![1.0], vec![1.0]));
    assert_eq!(frobenius_decay_grads(&l, 0.0).unwrap(), (vec![0.0], vec![0.0]));

    let mut rng = rng_for(11);
    let x: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
    let lambda = 0.3;
    let layer = SignInLayer::from_weights(vec![3, 4], &x, None, 1.0).unwrap();
    let penalty = |m: &[f64], w: &[f64]| lambda * m.iter().zip(w).map(|(a, b)| (a * b).powi(2)).sum::<f64>();
    let (gm, gw) = frobenius_decay_grads(&layer, lambda).unwrap();
    let h = 1e-6;
    for i in 0..12 {
        let (mut mp, mut mm) = (layer.m.clone(), layer.m.clone());
        mp[i] += h;
        mm[i] -= h;
        let fd = (penalty(&mp, &layer.w) - penalty(&mm, &layer.w)) / (2.0 * h);
        assert!((fd - gm[i]).abs() <= 1e-6 * gm[i].abs().max(1.0));
        let (mut wp, mut wm) = (layer.w.clone(), layer.w.clone());
        wp[i] += h;
        wm[i] -= h;
        let fd = (penalty(&layer.m, &wp) - penalty(&layer.m, &wm)) / (2.0 * h);
        assert!((fd - gw[i]).abs() <= 1e-6 * gw[i].abs().max(1.0));
    }
}

/// One Euler step of the factors on `L(θ) = Σ ½cθ² + bθ`.
fn euler_step(layer: &SignInLayer, c: &[f64], b: &[f64], lr: f64) -> SignInLayer {
    let theta = layer.product();
    let g: Vec<f64> = theta.iter().zip(c.iter().zip(b)).map(|(t, (c, b))| c * t + b).collect();
    let (gm, gw) = reparam_grads(layer, &g).unwrap();
    let mut next = layer.clone();
    next.step(&gm, &gw, lr);
    next
}

fn random_problem(seed: u64, n: usize) -> (SignInLayer, Vec<f64>, Vec<f64>) {
    let mut rng = rng_for(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let beta = rng.random_range(0.5..2.0);
    (SignInLayer::from_weights(vec![n], &x, None, beta).unwrap(), c, b)
}

fn max_drift(before: &SignInLayer, after: &SignInLayer) -> f64 {
    before
        .balance()
        .iter()
        .zip(after.balance())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn balance_drift_is_second_order() {
    for seed in 0..20 {
        let (layer, c, b) = random_problem(seed, 16);
        let eta = 1e-2;
        let d1 = max_drift(&layer, &euler_step(&layer, &c, &b, eta));
        let d2 = max_drift(&layer, &euler_step(&layer, &c, &b, eta / 2.0));
        let ratio = d1 / d2;
        assert!((3.5..=4.5).contains(&ratio), "seed {seed}: ratio {ratio}");
    }
}

#[test]
fn merged_step_follows_the_factor_metric() {
    for seed in 0..20 {
        let (layer, c, b) = random_problem(100 + seed, 16);
        let theta = layer.product();
        let g: Vec<f64> = theta.iter().zip(c.iter().zip(&b)).map(|(t, (c, b))| c * t + b).collect();
        let beta = layer.beta();
        let residual = |eta: f64| {
            let next = euler_step(&layer, &c, &b, eta).product();
            (0..theta.len())
                .map(|i| {
                    let dtheta = next[i] - theta[i];
                    let r = (dtheta + eta * (4.0 * theta[i] * theta[i] + beta * beta).sqrt() * g[i]).abs();
                    // The leftover is η²·θ·g², so C is set by the local θg².
                    r / (1.0 + theta[i].abs() * g[i] * g[i])
                })
                .fold(0.0, f64::max)
        };
        let (r1, r2) = (residual(1e-2), residual(5e-3));
        assert!(r1 <= 1e-2 * 1e-2 * 1.01, "seed {seed}: {r1}");
        assert!((3.5..=4.5).contains(&(r1 / r2)), "seed {seed}: {}", r1 / r2);
    }
}

#[test]
fn zero_weight_keeps_a_nonzero_step() {
    for beta in [0.5, 1.0, 2.0] {
        let l = SignInLayer::from_weights(vec![1], &[0.0], None, beta).unwrap();
        assert!(close(l.metric_factor()[0], beta, 1e-12));
    }
}

#[test]
fn schedule_rules() {
    let s = ReparamSchedule::new(2, 6, 1.0).unwrap();
    let picked: Vec<usize> = (1..=8).filter(|&e| s.should_rescale(e)).collect();
    assert_eq!(picked, vec![2, 4]);
    assert!(ReparamSchedule::new(7, 6, 1.0).is_err());
    assert!(ReparamSchedule::new(1, 6, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn split_round_trip(x in -10.0f64..10.0, bi in 0usize..3) {
        let beta = [0.5, 1.0, 2.0][bi];
        let (m, w) = split_init(&[x], beta).unwrap();
        prop_assert!((m[0] * w[0] - x).abs() <= 1e-12);
        prop_assert!((m[0] * m[0] - w[0] * w[0] - beta).abs() <= 1e-10);
        prop_assert!(m[0] > 0.0);
        prop_assert!(w[0] == 0.0 || w[0].signum() == x.signum());
    }
}

proptest! {
    #[test]
    fn rescale_is_idempotent_and_keeps_the_product(xs in prop::collection::vec(-10.0f64..10.0, 1..20), beta in 0.1f64..4.0) {
        let l = SignInLayer::from_weights(vec![xs.len()], &xs, None, beta).unwrap();
        let once = rescale(&l);
        let twice = rescale(&once);
        for i in 0..xs.len() {
            prop_assert!((once.m[i] - twice.m[i]).abs() <= 1e-12 * once.m[i].abs().max(1.0));
            prop_assert!((once.w[i] - twice.w[i]).abs() <= 1e-12 * once.w[i].abs().max(1.0));
            prop_assert!((merge(&once)[i] - xs[i]).abs() <= 1e-12 * xs[i].abs().max(1.0));
        }
    }

    #[test]
    fn chain_rule_conserves_the_balance(g in prop::collection::vec(-5.0f64..5.0, 4), xs in prop::collection::vec(-3.0f64..3.0, 4)) {
        let l = SignInLayer::from_weights(vec![4], &xs, None, 1.0).unwrap();
        let (gm, gw) = reparam_grads(&l, &g).unwrap();
        for i in 0..4 {
            prop_assert!((l.m[i] * gm[i] - l.w[i] * gw[i]).abs() <= 1e-12 * (1.0 + g[i].abs() * xs[i].abs()));
        }
    }
}
