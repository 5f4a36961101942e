use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{sample_teacher_data, NeuronData, Teacher};
use super::field::{accumulate_grads, closed_form, metric_factor, FlowMethod, PopulationField};
use crate::error::{Error, Result};
use crate::reparam::split_scalar;

/// Loss threshold of the success test.
pub const SUCCESS_LOSS: f64 = 1e-4;
/// Relative tolerance on `a·w₁` against the teacher's product.
pub const SUCCESS_PRODUCT_TOL: f64 = 1e-2;
/// Consecutive successful steps after which integration stops.
pub const SUCCESS_HOLD: usize = 100;
/// State norm below which a run is stopped as collapsed onto the origin.
pub const ORIGIN_STOP: f64 = 1e-6;
/// Terminal state norm classified as origin collapse.
pub const ORIGIN_CLASSIFY: f64 = 1e-3;
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Samples {
    Finite(usize),
    /// Closed-form expected loss; only for `d = 1` and the canonical teacher.
    Population,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    OriginCollapse,
    DeadBoundary,
    Diverged,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::OriginCollapse => "origin-collapse",
            Outcome::DeadBoundary => "dead-boundary",
            Outcome::Diverged => "diverged",
            Outcome::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One single-neuron student-teacher experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronFlowConfig {
    pub teacher: Teacher,
    pub samples: Samples,
    /// Inner scaling of the outer weight `a`.
    pub beta1: f64,
    /// Inner scaling of every inner weight `w_k`.
    pub beta2: f64,
    pub init_a: f64,
    pub init_w: Vec<f64>,
    pub step: f64,
    pub max_time: f64,
    pub method: FlowMethod,
    pub integrator: Integrator,
    /// Require `a² = ‖w‖²` at initialization.
    pub balanced: bool,
    /// Seed of the data draw when `samples` is finite.
    pub data_seed: u64,
    /// Keep every k-th state in the trace (the terminal state is always kept).
    pub record_every: usize,
    /// End the run once the success test has held for `SUCCESS_HOLD` steps.
    #[serde(default = "yes")]
    pub stop_on_success: bool,
}

fn yes() -> bool {
    true
}

impl NeuronFlowConfig {
    /// Canonical teacher `ã = 1, w̃ = e₁`, 64 samples, Euler with `η = 0.01` up to `T = 200`.
    pub fn new(init_a: f64, init_w: Vec<f64>, method: FlowMethod) -> Self {
        let d = init_w.len().max(1);
        Self {
            teacher: Teacher::canonical(1.0, d).expect("valid canonical teacher"),
            samples: Samples::Finite(64),
            beta1: 2.0,
            beta2: 1.0,
            init_a,
            init_w,
            step: 0.01,
            max_time: 200.0,
            method,
            integrator: Integrator::Euler,
            balanced: true,
            data_seed: 0,
            record_every: 100,
            stop_on_success: true,
        }
    }

    pub fn d(&self) -> usize {
        self.init_w.len()
    }

    pub fn max_steps(&self) -> usize {
        (self.max_time / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if d == 0 {
            return Err(Error::invalid("init_w", "dimension must be at least 1"));
        }
        if self.teacher.dim() != d {
            return Err(Error::Shape("teacher and student dimensions differ".into()));
        }
        if !(self.teacher.a > 0.0) {
            return Err(Error::invalid("teacher_a", "must be positive"));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !(self.step > 0.0 && self.max_time > 0.0) {
            return Err(Error::invalid("step", "step and max_time must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be positive"));
        }
        if let Samples::Finite(0) = self.samples {
            return Err(Error::invalid("n_samples", "must be positive"));
        }
        if self.samples == Samples::Population && d != 1 {
            return Err(Error::invalid("samples", "population field is only available for d = 1"));
        }
        if self.balanced {
            let nw: f64 = self.init_w.iter().map(|w| w * w).sum();
            let a2 = self.init_a * self.init_a;
            if (a2 - nw).abs() > 1e-9 * (1.0 + a2) {
                return Err(Error::invalid("init_a", format!("unbalanced init: a² = {a2}, ‖w‖² = {nw}")));
            }
        }
        if !self.init_a.is_finite() || self.init_w.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("init_w", "initial state must be finite"));
        }
        Ok(())
    }
}

/// Sampled trajectory of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub steps: usize,
    pub outcome: Outcome,
}

impl FlowTrace {
    /// Builds a single-point trace, mainly for classifying hand-made states.
    pub fn terminal(a: f64, w: Vec<f64>, loss: f64) -> Self {
        Self {
            times: vec![0.0],
            a: vec![a],
            w: vec![w],
            losses: vec![loss],
            steps: 0,
            outcome: Outcome::Timeout,
        }
    }

    pub fn final_a(&self) -> f64 {
        *self.a.last().expect("trace is never empty")
    }

    pub fn final_w(&self) -> &[f64] {
        self.w.last().expect("trace is never empty")
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trace is never empty")
    }
}

pub fn is_success(a: f64, w1: f64, loss: f64, teacher: &Teacher) -> bool {
    loss < SUCCESS_LOSS && a > 0.0 && ((a * w1) / teacher.product() - 1.0).abs() < SUCCESS_PRODUCT_TOL
}

fn state_norm(a: f64, w: &[f64]) -> f64 {
    (a * a + w.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub fn classify_outcome(trace: &FlowTrace, teacher: &Teacher) -> Outcome {
    let a = trace.final_a();
    let w = trace.final_w();
    let loss = trace.final_loss();
    let norm = state_norm(a, w);
    if !norm.is_finite() || !loss.is_finite() || norm > DIVERGENCE_NORM {
        Outcome::Diverged
    } else if is_success(a, w[0], loss, teacher) {
        Outcome::Success
    } else if norm < ORIGIN_CLASSIFY {
        Outcome::OriginCollapse
    } else if w[0] <= 0.0 {
        Outcome::DeadBoundary
    } else {
        Outcome::Timeout
    }
}

enum Field<'a> {
    Empirical(&'a NeuronData),
    Population(PopulationField),
}

struct Integration<'a> {
    cfg: &'a NeuronFlowConfig,
    field: Field<'a>,
    grad_w: Vec<f64>,
}

impl Integration<'_> {
    /// Loss and raw gradient at `(a, w)`; gradient written into `self.grad_w`.
    fn gradient(&mut self, a: f64, w: &[f64]) -> (f64, f64) {
        match &self.field {
            Field::Empirical(data) => accumulate_grads(a, w, data, &mut self.grad_w),
            Field::Population(p) => {
                // Valid on w₁ > 0 where σ(w z) = w σ(z).
                let c = p.c;
                let target = self.cfg.teacher.product();
                let resid = a * w[0] - target;
                self.grad_w[0] = c * a * resid;
                (0.5 * c * resid * resid, c * w[0] * resid)
            }
        }
    }

    /// Velocity `(da, dw)` under the configured metric.
    fn velocity(&mut self, a: f64, w: &[f64], dw: &mut [f64]) -> f64 {
        let method = self.cfg.method;
        if let Field::Population(p) = &self.field {
            if self.cfg.teacher.product() == 1.0 {
                let (va, vw) = closed_form(a, w[0], p.c, self.cfg.beta1, self.cfg.beta2, method);
                dw[0] = vw;
                return va;
            }
        }
        let (_, ga) = self.gradient(a, w);
        for (k, v) in dw.iter_mut().enumerate() {
            *v = -metric_factor(method, w[k], self.cfg.beta2) * self.grad_w[k];
        }
        -metric_factor(method, a, self.cfg.beta1) * ga
    }
}

/// Integrates the configured dynamics, sampling data from `config.data_seed`.
pub fn flow_integrate(config: &NeuronFlowConfig) -> Result<FlowTrace> {
    config.validate()?;
    match config.samples {
        Samples::Finite(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.data_seed);
            let data = sample_teacher_data(n, config.d(), &config.teacher, &mut rng)?;
            flow_integrate_on(config, &data)
        }
        Samples::Population => run(config, Field::Population(PopulationField::STANDARD_NORMAL)),
    }
}

/// Integrates on a caller-supplied finite data set.
pub fn flow_integrate_on(config: &NeuronFlowConfig, data: &NeuronData) -> Result<FlowTrace> {
    config.validate()?;
    if data.d != config.d() {
        return Err(Error::Shape("data dimension differs from the student".into()));
    }
    run(config, Field::Empirical(data))
}

fn run(cfg: &NeuronFlowConfig, field: Field<'_>) -> Result<FlowTrace> {
    let d = cfg.d();
    let population = matches!(field, Field::Population(_));
    let mut it = Integration {
        cfg,
        field,
        grad_w: vec![0.0; d],
    };
    let mut a = cfg.init_a;
    let mut w = cfg.init_w.clone();
    // Factor pairs for discrete Sign-In on (m, w).
    let factored = cfg.method == FlowMethod::SignInFactored && cfg.integrator == Integrator::Euler;
    let (mut ma, mut va) = split_scalar(a, cfg.beta1);
    let (mut mw, mut vw): (Vec<f64>, Vec<f64>) = w.iter().map(|&x| split_scalar(x, cfg.beta2)).unzip();

    let mut trace = FlowTrace {
        times: Vec::new(),
        a: Vec::new(),
        w: Vec::new(),
        losses: Vec::new(),
        steps: 0,
        outcome: Outcome::Timeout,
    };
    let eta = cfg.step;
    let max_steps = cfg.max_steps();
    let mut hold = 0usize;
    let mut stop: Option<Outcome> = None;
    let mut k1w = vec![0.0; d];
    let mut k2w = vec![0.0; d];
    let mut k3w = vec![0.0; d];
    let mut k4w = vec![0.0; d];
    let mut tmp = vec![0.0; d];

    let mut step = 0usize;
    loop {
        if population && w[0] <= 0.0 {
            stop = Some(Outcome::DeadBoundary);
        }
        let (loss, ga) = if population && w[0] <= 0.0 {
            (f64::NAN, 0.0)
        } else {
            it.gradient(a, &w)
        };
        if step % cfg.record_every == 0 || stop.is_some() || step == max_steps {
            trace.times.push(step as f64 * eta);
            trace.a.push(a);
            trace.w.push(w.clone());
            trace.losses.push(loss);
        }
        if stop.is_some() || step == max_steps {
            break;
        }
        if is_success(a, w[0], loss, &cfg.teacher) {
            hold += 1;
            if cfg.stop_on_success && hold >= SUCCESS_HOLD {
                stop = Some(Outcome::Success);
                // Record the state that met the criterion.
                if trace.times.last() != Some(&(step as f64 * eta)) {
                    trace.times.push(step as f64 * eta);
                    trace.a.push(a);
                    trace.w.push(w.clone());
                    trace.losses.push(loss);
                }
                break;
            }
        } else {
            hold = 0;
        }

        match cfg.integrator {
            Integrator::Euler if factored => {
                let (gma, gva) = (va * ga, ma * ga);
                ma -= eta * gma;
                va -= eta * gva;
                a = ma * va;
                for k in 0..d {
                    let g = it.grad_w[k];
                    let (gm, gv) = (vw[k] * g, mw[k] * g);
                    mw[k] -= eta * gm;
                    vw[k] -= eta * gv;
                    w[k] = mw[k] * vw[k];
                }
            }
            Integrator::Euler => {
                a -= eta * metric_factor(cfg.method, a, cfg.beta1) * ga;
                for k in 0..d {
                    w[k] -= eta * metric_factor(cfg.method, w[k], cfg.beta2) * it.grad_w[k];
                }
            }
            Integrator::Rk4 => {
                let ka1 = it.velocity(a, &w, &mut k1w);
                tmp.iter_mut().zip(&w).zip(&k1w).for_each(|((t, x), k)| *t = x + 0.5 * eta * k);
                let ka2 = it.velocity(a + 0.5 * eta * ka1, &tmp, &mut k2w);
                tmp.iter_mut().zip(&w).zip(&k2w).for_each(|((t, x), k)| *t = x + 0.5 * eta * k);
                let ka3 = it.velocity(a + 0.5 * eta * ka2, &tmp, &mut k3w);
                tmp.iter_mut().zip(&w).zip(&k3w).for_each(|((t, x), k)| *t = x + eta * k);
                let ka4 = it.velocity(a + eta * ka3, &tmp, &mut k4w);
                a += eta / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
                for k in 0..d {
                    w[k] += eta / 6.0 * (k1w[k] + 2.0 * k2w[k] + 2.0 * k3w[k] + k4w[k]);
                }
            }
        }
        step += 1;
        trace.steps = step;

        let norm = state_norm(a, &w);
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            stop = Some(Outcome::Diverged);
        } else if norm < ORIGIN_STOP {
            stop = Some(Outcome::OriginCollapse);
        }
    }

    trace.outcome = match stop {
        Some(Outcome::DeadBoundary) => Outcome::DeadBoundary,
        Some(Outcome::Diverged) => Outcome::Diverged,
        _ => classify_outcome(&trace, &cfg.teacher),
    };
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let t = Teacher::canonical(1.0, 1).unwrap();
        assert_eq!(classify_outcome(&FlowTrace::terminal(2.0, vec![0.5], 0.0), &t), Outcome::Success);
        let wrong = FlowTrace::terminal(-1.0, vec![-1.0], 0.25);
        assert_ne!(classify_outcome(&wrong, &t), Outcome::Success);
        assert_eq!(classify_outcome(&FlowTrace::terminal(0.0, vec![0.0], 0.25), &t), Outcome::OriginCollapse);
        assert_eq!(
            classify_outcome(&FlowTrace::terminal(f64::NAN, vec![0.0], f64::NAN), &t),
            Outcome::Diverged
        );
    }

    #[test]
    fn sign_in_recovers_wrong_outer_sign() {
        let cfg = NeuronFlowConfig::new(-0.9, vec![0.9], FlowMethod::SignIn);
        let trace = flow_integrate(&cfg).unwrap();
        assert_eq!(trace.outcome, Outcome::Success);
        let (a, w1) = (trace.final_a(), trace.final_w()[0]);
        assert!(a > 0.0 && (a * w1 - 1.0).abs() <= 1e-3 + 1e-2, "a={a} w={w1}");
    }

    #[test]
    fn standard_flow_collapses_from_wrong_outer_sign() {
        let cfg = NeuronFlowConfig::new(-0.9, vec![0.9], FlowMethod::Standard);
        assert_eq!(flow_integrate(&cfg).unwrap().outcome, Outcome::OriginCollapse);
    }

    #[test]
    fn negative_inner_weight_always_fails() {
        for method in [FlowMethod::Standard, FlowMethod::SignIn, FlowMethod::SignInFactored] {
            for a in [0.9, -0.9] {
                let cfg = NeuronFlowConfig::new(a, vec![-0.9], method);
                let out = flow_integrate(&cfg).unwrap().outcome;
                assert_ne!(out, Outcome::Success, "{method:?} a={a}");
            }
        }
    }

    #[test]
    fn rejects_unbalanced_init() {
        let cfg = NeuronFlowConfig::new(-0.5, vec![0.9], FlowMethod::SignIn);
        assert!(flow_integrate(&cfg).is_err());
    }

    #[test]
    fn population_rk4_converges_on_hyperbola() {
        let mut cfg = NeuronFlowConfig::new(-0.9, vec![0.9], FlowMethod::SignIn);
        cfg.samples = Samples::Population;
        cfg.integrator = Integrator::Rk4;
        cfg.step = 0.05;
        let trace = flow_integrate(&cfg).unwrap();
        assert_eq!(trace.outcome, Outcome::Success);
    }

    #[test]
    fn trace_times_are_monotone() {
        let cfg = NeuronFlowConfig::new(0.5, vec![0.5], FlowMethod::Standard);
        let trace = flow_integrate(&cfg).unwrap();
        assert!(trace.times.windows(2).all(|p| p[0] < p[1]));
    }
}
