use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use signlab::autodiff::*;
use signlab::harness::rng_for;

fn single_neuron(a: f64, w: f64) -> SmallNet {
    let l1 = Layer::new(DenseTensor::matrix(1, 1, vec![w]).unwrap(), None, ParamKind::Plain).unwrap();
    let l2 = Layer::new(DenseTensor::matrix(1, 1, vec![a]).unwrap(), None, ParamKind::Plain).unwrap();
    SmallNet::new(vec![l1, l2], Loss::Mse).unwrap()
}

fn col(v: &[f64]) -> DenseTensor {
    DenseTensor::matrix(v.len(), 1, v.to_vec()).unwrap()
}

#[test]
fn forward_examples() {
    let (out, _) = mlp_forward(&single_neuron(1.0, 1.0), &col(&[2.0, -1.0])).unwrap();
    assert_eq!(out.values(), &[2.0, 0.0]);

    let zero = |r, c| Layer::new(DenseTensor::zeros(vec![r, c]), None, ParamKind::Plain).unwrap();
    let net = SmallNet::new(vec![zero(2, 2), zero(1, 2)], Loss::Mse).unwrap();
    let batch = DenseTensor::from_rows(&[vec![3.0, -7.0], vec![0.5, 1.5]]).unwrap();
    assert_eq!(mlp_forward(&net, &batch).unwrap().0.values(), &[0.0, 0.0]);

    assert!(mlp_forward(&net, &col(&[1.0])).is_err());
}

#[test]
fn backward_hand_values() {
    let y = Targets::Values(col(&[1.0]));
    let (_, g) = loss_and_grads(&single_neuron(1.0, 1.0), &col(&[1.0]), &y).unwrap();
    assert_eq!(g.flatten(), vec![0.0, 0.0]);

    let (_, g) = loss_and_grads(&single_neuron(0.5, 1.0), &col(&[1.0]), &y).unwrap();
    // Flat order is layer by layer: w then a.
    let f = g.flatten();
    assert!((f[1] + 0.5).abs() < 1e-15);
    assert!((f[0] + 0.25).abs() < 1e-15);
}

/// Builds a random net with ≤ 200 parameters, random biases and a random loss.
fn random_net(seed: u64) -> (SmallNet, DenseTensor, Targets) {
    let mut rng = rng_for(seed);
    let depth = rng.random_range(2..=3);
    let mut sizes = vec![rng.random_range(1..=4)];
    for _ in 0..depth - 1 {
        sizes.push(rng.random_range(2..=8));
    }
    let loss = if seed % 2 == 0 { Loss::Mse } else { Loss::CrossEntropy };
    sizes.push(rng.random_range(2..=3));
    let mut net = SmallNet::init(&sizes, loss, ParamKind::Plain, &mut rng).unwrap().with_zero_biases();
    for l in net.layers_mut() {
        for b in l.bias.as_mut().unwrap() {
            *b = 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    assert!(net.num_params() <= 200, "{sizes:?}");
    let n = 6;
    let x: Vec<f64> = (0..n * sizes[0]).map(|_| rng.sample(StandardNormal)).collect();
    let batch = DenseTensor::matrix(n, sizes[0], x).unwrap();
    let k = *sizes.last().unwrap();
    let targets = match loss {
        Loss::Mse => Targets::Values(
            DenseTensor::matrix(n, k, (0..n * k).map(|_| rng.sample(StandardNormal)).collect()).unwrap(),
        ),
        Loss::CrossEntropy => Targets::Classes((0..n).map(|_| rng.random_range(0..k)).collect()),
    };
    (net, batch, targets)
}

#[test]
fn gradients_match_central_differences_on_20_nets() {
    for seed in 0..20 {
        let (net, batch, targets) = random_net(seed);
        let (_, g) = loss_and_grads(&net, &batch, &targets).unwrap();
        let g = g.flatten();
        let theta = net.params_flat();
        let h = 1e-5;
        let mut probe = net.clone();
        let mut fd = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            probe.set_params_flat(&t).unwrap();
            let up = loss_value(&probe, &batch, &targets).unwrap();
            t[i] -= 2.0 * h;
            probe.set_params_flat(&t).unwrap();
            let down = loss_value(&probe, &batch, &targets).unwrap();
            fd[i] = (up - down) / (2.0 * h);
        }
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-8);
        assert!(diff / scale <= 1e-5, "seed {seed}: rel err {}", diff / scale);
    }
}

#[test]
fn forward_is_bitwise_deterministic() {
    let (net, batch, _) = random_net(3);
    let a = mlp_forward(&net, &batch).unwrap().0;
    let b = mlp_forward(&net.clone(), &batch.clone()).unwrap().0;
    assert_eq!(
        a.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn sgd_examples() {
    let mut p = vec![1.0];
    sgd_update(&mut p, &[1.0], 0.1, 0.0).unwrap();
    assert!((p[0] - 0.9).abs() < 1e-15);
    let mut p = vec![1.0];
    sgd_update(&mut p, &[0.0], 0.1, 0.5).unwrap();
    assert!((p[0] - 0.95).abs() < 1e-15);
    let mut p = vec![0.3];
    sgd_update(&mut p, &[0.0], 0.1, 0.0).unwrap();
    assert_eq!(p, vec![0.3]);
    assert!(sgd_update(&mut p, &[0.0], 0.0, 0.0).is_err());
}

#[test]
fn hvp_on_diagonal_quadratic() {
    let q = Quadratic::diagonal(&[1.0, 2.0]);
    let hv = hvp_fd(&q, &[0.3, -0.2], &[1.0, 0.0], 1e-4).unwrap();
    assert!((hv[0] - 1.0).abs() < 1e-12 && hv[1].abs() < 1e-12);
    let hv = hvp_fd(&q, &[0.3, -0.2], &[0.0, 1.0], 1e-4).unwrap();
    assert!((hv[0]).abs() < 1e-12 && (hv[1] - 2.0).abs() < 1e-12);
    assert!(hvp_fd(&q, &[0.0, 0.0], &[0.0, 0.0], 1e-4).is_err());
}

fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed);
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&b + b.transpose()) * 0.5
}

#[test]
fn hvp_matches_analytic_hessian_8x8() {
    for seed in 0..5 {
        let a = random_symmetric(8, seed);
        let q = Quadratic::new(8, a.as_slice().to_vec()).unwrap();
        let mut rng = rng_for(100 + seed);
        let v: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let theta: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let expect = &a * DVector::from_vec(v.clone());
        for eps in [1e-6, 1e-5, 1e-4, 1e-3] {
            let got = DVector::from_vec(hvp_fd(&q, &theta, &v, eps).unwrap());
            let rel = (&got - &expect).norm() / expect.norm();
            assert!(rel <= 1e-4, "seed {seed} eps {eps}: {rel}");
        }
    }
}

proptest! {
    #[test]
    fn relu_outputs_are_nonnegative_in_hidden_layers(w in -3.0f64..3.0, z in -3.0f64..3.0) {
        let (out, _) = mlp_forward(&single_neuron(1.0, w), &col(&[z])).unwrap();
        prop_assert!(out.values()[0] >= 0.0);
        prop_assert_eq!(out.values()[0], (w * z).max(0.0));
    }
}
