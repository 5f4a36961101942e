use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use signlab::harness::{rng_for, seed_spawn, Execution};
use signlab::neuron::*;

fn one_d(z: Vec<f64>) -> NeuronData {
    NeuronData::new(1, z, &Teacher::canonical(1.0, 1).unwrap()).unwrap()
}

#[test]
fn teacher_data_examples() {
    let data = one_d(vec![2.0, -1.0]);
    assert_eq!(data.y, vec![2.0, 0.0]);

    let t = Teacher::canonical(1.0, 1).unwrap();
    let n = 20_000;
    let data = sample_teacher_data(n, 1, &t, &mut rng_for(3)).unwrap();
    assert!(data.y.iter().all(|&y| y >= 0.0));
    let frac = data.y.iter().filter(|&&y| y > 0.0).count() as f64 / n as f64;
    assert!((frac - 0.5).abs() <= 3.0 / (n as f64).sqrt(), "{frac}");

    let t = Teacher::canonical(2.0, 4).unwrap();
    let data = sample_teacher_data(50, 4, &t, &mut rng_for(4)).unwrap();
    assert!(data.y.iter().all(|&y| y >= 0.0));
}

#[test]
fn empirical_gradient_examples() {
    let t = Teacher::canonical(2.0, 3).unwrap();
    let data = sample_teacher_data(100, 3, &t, &mut rng_for(1)).unwrap();
    let g = empirical_grads(2.0, &t.w, &data).unwrap();
    assert_eq!((g.da, g.dw.clone()), (0.0, vec![0.0; 3]));

    let g = empirical_grads(0.5, &[1.0], &one_d(vec![1.0])).unwrap();
    assert!((g.da + 0.5).abs() < 1e-15 && (g.dw[0] + 0.25).abs() < 1e-15);

    let g = empirical_grads(0.5, &[-1.0], &one_d(vec![1.0])).unwrap();
    assert_eq!((g.da, g.dw[0]), (0.0, 0.0));
}

#[test]
fn empirical_gradients_match_finite_differences() {
    let t = Teacher::canonical(1.0, 4).unwrap();
    let data = sample_teacher_data(64, 4, &t, &mut rng_for(9)).unwrap();
    let mut rng = rng_for(10);
    for _ in 0..10 {
        let a: f64 = rng.sample(StandardNormal);
        let w: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let g = empirical_grads(a, &w, &data).unwrap();
        let loss = |a: f64, w: &[f64]| empirical_grads(a, w, &data).unwrap().loss;
        let h = 1e-6;
        let fd = (loss(a + h, &w) - loss(a - h, &w)) / (2.0 * h);
        assert!((fd - g.da).abs() <= 1e-6 * (1.0 + g.da.abs()));
        for k in 0..4 {
            let (mut up, mut dn) = (w.clone(), w.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (loss(a, &up) - loss(a, &dn)) / (2.0 * h);
            assert!((fd - g.dw[k]).abs() <= 1e-6 * (1.0 + g.dw[k].abs()));
        }
    }
}

#[test]
fn population_field_examples() {
    let p = PopulationField::STANDARD_NORMAL;
    for m in [FlowMethod::Standard, FlowMethod::SignIn, FlowMethod::SignInFactored] {
        let (da, dw) = population_field(2.0, 0.5, p, 2.0, 1.0, m).unwrap();
        assert!(da.abs() < 1e-15 && dw.abs() < 1e-15);
        assert!(population_field(0.0, 0.0, p, 2.0, 1.0, m).is_err());
    }
    let (da, _) = population_field(0.0, 1.0, p, 1.0, 1.0, FlowMethod::SignIn).unwrap();
    assert!((da - 0.5).abs() < 1e-15);
    let (da, dw) = population_field(0.3, 0.7, p, 1.0, 1.0, FlowMethod::Standard).unwrap();
    assert!((da + 0.5 * (0.3 * 0.49 - 0.7)).abs() < 1e-15);
    assert!((dw + 0.5 * (0.09 * 0.7 - 0.3)).abs() < 1e-15);
    assert!(population_field(1.0, -0.1, p, 1.0, 1.0, FlowMethod::Standard).is_err());
}

#[test]
fn population_field_matches_large_sample_gradients() {
    let t = Teacher::canonical(1.0, 1).unwrap();
    let data = sample_teacher_data(100_000, 1, &t, &mut rng_for(77)).unwrap();
    let field = PopulationField::new(data.curvature()).unwrap();
    let mut rng = rng_for(78);
    for _ in 0..20 {
        let a: f64 = 2.0 * rng.sample::<f64, _>(StandardNormal);
        let w = 0.05 + rng.random::<f64>() * 2.0;
        let g = empirical_grads(a, &[w], &data).unwrap();
        let (da, dw) = population_field(a, w, field, 1.0, 1.0, FlowMethod::Standard).unwrap();
        let rel = ((da + g.da).powi(2) + (dw + g.dw[0]).powi(2)).sqrt() / da.hypot(dw).max(1e-12);
        assert!(rel <= 0.02, "a {a} w {w}: {rel}");
    }
    // With the population constant itself the agreement is statistical.
    assert!((data.curvature() - 0.5).abs() < 0.02);
}

#[test]
fn classify_examples() {
    let t = Teacher::canonical(1.0, 1).unwrap();
    let c = |a: f64, w: f64, loss: f64| classify_outcome(&FlowTrace::terminal(a, vec![w], loss), &t);
    assert_eq!(c(2.0, 0.5, 0.0), Outcome::Success);
    assert_ne!(c(-1.0, -1.0, 0.0), Outcome::Success);
    assert_eq!(c(0.0, 0.0, 0.25), Outcome::OriginCollapse);
    assert_eq!(c(-0.5, -0.8, 0.25), Outcome::DeadBoundary);
    assert_eq!(c(1e7, 1.0, 1.0), Outcome::Diverged);
    assert_eq!(c(0.5, 0.5, 0.1), Outcome::Timeout);
    assert!(!is_success(1.0, 1.02, 1e-5, &t));
    assert!(!is_success(1.0, 1.0, 2e-4, &t));
}

#[test]
fn flow_examples() {
    let mut cfg = NeuronFlowConfig::new(-0.9, vec![0.9], FlowMethod::SignIn);
    cfg.stop_on_success = false;
    let tr = flow_integrate(&cfg).unwrap();
    assert_eq!(tr.outcome, Outcome::Success);
    let prod = tr.final_a() * tr.final_w()[0];
    assert!(tr.final_a() > 0.0 && (0.999..=1.001).contains(&prod), "{prod}");

    cfg.method = FlowMethod::Standard;
    assert_eq!(flow_integrate(&cfg).unwrap().outcome, Outcome::OriginCollapse);

    for m in [FlowMethod::Standard, FlowMethod::SignIn, FlowMethod::SignInFactored] {
        let cfg = NeuronFlowConfig::new(0.9, vec![-0.9], m);
        assert_ne!(flow_integrate(&cfg).unwrap().outcome, Outcome::Success);
    }

    let mut bad = NeuronFlowConfig::new(0.9, vec![0.3], FlowMethod::Standard);
    assert!(flow_integrate(&bad).is_err());
    bad.balanced = false;
    assert!(flow_integrate(&bad).is_ok());
}

#[test]
fn trace_times_are_monotone_and_finite() {
    let mut cfg = NeuronFlowConfig::new(-0.5, vec![0.5], FlowMethod::SignIn);
    cfg.integrator = Integrator::Rk4;
    cfg.samples = Samples::Population;
    cfg.record_every = 7;
    let tr = flow_integrate(&cfg).unwrap();
    assert!(tr.times.windows(2).all(|t| t[0] < t[1]));
    assert!(tr.a.iter().chain(tr.losses.iter()).all(|x| x.is_finite()));
    assert_eq!(tr.outcome, Outcome::Success);
}

/// Success counts per quadrant for the d = 1 flow with empirical gradients.
fn quadrant_counts(method: FlowMethod, beta: (f64, f64), seeds: u64) -> [usize; 4] {
    let mut counts = [0; 4];
    for q in Quadrant::ALL {
        for s in 0..seeds {
            let seed = seed_spawn(1_000, s);
            let (a, w) = balanced_init(1, 1.0, q, &mut rng_for(seed));
            let mut cfg = NeuronFlowConfig::new(a, w, method);
            (cfg.beta1, cfg.beta2) = beta;
            cfg.data_seed = seed;
            cfg.record_every = usize::MAX;
            if flow_integrate(&cfg).unwrap().outcome == Outcome::Success {
                counts[q.index()] += 1;
            }
        }
    }
    counts
}

#[test]
fn standard_flow_succeeds_only_from_the_positive_quadrant() {
    let c = quadrant_counts(FlowMethod::Standard, (2.0, 1.0), 50);
    assert_eq!(c, [50, 0, 0, 0]);
}

#[test]
fn sign_in_flow_recovers_a_negative_outer_sign() {
    let c = quadrant_counts(FlowMethod::SignIn, (2.0, 1.0), 50);
    assert!(c[Quadrant::PosPos.index()] >= 49 && c[Quadrant::NegPos.index()] >= 49, "{c:?}");
    assert_eq!((c[Quadrant::PosNeg.index()], c[Quadrant::NegNeg.index()]), (0, 0));
}

#[test]
fn no_scaling_rescues_a_dead_inner_weight() {
    let mut rng = rng_for(5);
    let mut betas = vec![(2.0, 1.0)];
    betas.extend((0..5).map(|_| (rng.random_range(0.1..5.0), rng.random_range(0.1..5.0))));
    for (method, beta) in betas
        .iter()
        .flat_map(|&b| [(FlowMethod::SignIn, b), (FlowMethod::SignInFactored, b)])
        .chain([(FlowMethod::Standard, (1.0, 1.0))])
    {
        let c = quadrant_counts(method, beta, 10);
        assert_eq!(c[Quadrant::PosNeg.index()] + c[Quadrant::NegNeg.index()], 0, "{method:?} {beta:?}");
    }
}

#[test]
fn boundary_push_from_the_antidiagonal() {
    // On a = −w, w > 0 the closed form gives d(a + w)/dt = C·w(w² + 1)(sqrt(w² + β₁) − sqrt(w² + β₂)).
    let p = PopulationField::STANDARD_NORMAL;
    for w in [0.1, 0.5, 0.9, 2.0] {
        let (da, dw) = population_field(-w, w, p, 2.0, 1.0, FlowMethod::SignIn).unwrap();
        let expect = p.c * w * (w * w + 1.0) * ((w * w + 2.0f64).sqrt() - (w * w + 1.0f64).sqrt());
        assert!(da + dw > 0.0);
        assert!((da + dw - expect).abs() < 1e-12);
        let (sa, sw) = population_field(-w, w, p, 2.0, 1.0, FlowMethod::Standard).unwrap();
        assert!((sa + sw).abs() < 1e-12);
    }
}

#[test]
fn outer_weight_moves_faster_at_balanced_init() {
    let mut rng = rng_for(8);
    for d in 2..=8 {
        for _ in 0..200 {
            let (a, w) = balanced_init(d, 1.0, Quadrant::NegPos, &mut rng);
            let beta = rng.random_range(0.1..3.0);
            let lhs = (a * a + beta).sqrt();
            let rhs = w.iter().map(|x| (x * x + beta).sqrt()).sum::<f64>() / d as f64;
            assert!(lhs >= rhs);
        }
    }
}

#[test]
fn stable_direction_examples() {
    let v = stable_manifold_direction(4.0, 1.0).unwrap();
    assert!((v[0] / v[1] + 2.0).abs() < 1e-14);
    let v = stable_manifold_direction(1.5, 1.5).unwrap();
    assert!((v[0] + v[1]).abs() < 1e-15);
    assert!(stable_manifold_direction(-1.0, 1.0).is_err());
}

#[test]
fn cob_init_properties() {
    let (a, w) = cob_init(20, 2, 4).unwrap();
    let paired: f64 = (0..10).map(|i| a[i] + a[i + 10]).sum();
    assert_eq!(paired, 0.0);
    assert_eq!(a[0], -a[10]);
    assert_eq!((w.len(), w[0].len()), (20, 2));
    assert!(cob_init(3, 2, 0).is_err());

    let mut all = Vec::new();
    for seed in 0..200 {
        let (a, w) = cob_init(20, 2, seed).unwrap();
        all.extend(a);
        all.extend(w.into_iter().flatten());
    }
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (all.len() - 1) as f64;
    assert!((var - 0.5).abs() <= 0.15, "{var}");
}

#[test]
fn quadrant_sweep_small() {
    let mut cfg = SweepConfig { runs: 8, ..Default::default() };
    cfg.methods = vec![SweepMethod::Sparse, SweepMethod::SignIn];
    let res = quadrant_sweep(&cfg, Execution::Parallel).unwrap();
    let table = res.table(&cfg.methods);
    assert_eq!(table[0].1, [1.0, 0.0, 0.0, 0.0]);
    assert_eq!(table[1].1, [1.0, 1.0, 0.0, 0.0]);
    let again = quadrant_sweep(&cfg, Execution::Serial).unwrap();
    assert_eq!(res, again);
}

proptest! {
    #[test]
    fn balanced_init_is_balanced(d in 1usize..8, std in 0.1f64..3.0, seed in 0u64..1000, qi in 0usize..4) {
        let q = Quadrant::ALL[qi];
        let (a, w) = balanced_init(d, std, q, &mut rng_for(seed));
        let (sa, sw) = q.signs();
        prop_assert!((a * a - w.iter().map(|x| x * x).sum::<f64>()).abs() <= 1e-12 * (1.0 + a * a));
        prop_assert_eq!(a.signum(), sa);
        prop_assert_eq!(w[0].signum(), sw);
    }

    #[test]
    fn metric_factor_is_at_least_the_standard_one_for_large_beta(x in -5.0f64..5.0, beta in 1.0f64..4.0) {
        prop_assert!(metric_factor(FlowMethod::SignIn, x, beta) >= 1.0);
        prop_assert!(metric_factor(FlowMethod::SignInFactored, x, beta) >= 1.0);
        prop_assert_eq!(metric_factor(FlowMethod::Standard, x, beta), 1.0);
    }
}
