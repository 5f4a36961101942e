use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::data::{sample_teacher_data, NeuronData, Teacher};
use super::field::FlowMethod;
use super::flow::{flow_integrate_on, NeuronFlowConfig, Outcome, Samples};
use crate::error::{Error, Result};
use crate::harness::{map_runs, rng_for, seed_spawn, substream, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMethod {
    /// `d = 1`, plain gradient descent.
    Sparse,
    /// `d > 1`, plain gradient descent.
    Overparam,
    /// `d = 1`, Sign-In gradient descent.
    SignIn,
    /// `d > 1`, Sign-In gradient descent.
    #[serde(rename = "overparam+sign-in")]
    OverparamSignIn,
}

impl SweepMethod {
    pub const ALL: [SweepMethod; 4] = [
        SweepMethod::Sparse,
        SweepMethod::Overparam,
        SweepMethod::SignIn,
        SweepMethod::OverparamSignIn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepMethod::Sparse => "sparse",
            SweepMethod::Overparam => "overparam",
            SweepMethod::SignIn => "sign-in",
            SweepMethod::OverparamSignIn => "overparam+sign-in",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn is_overparam(self) -> bool {
        matches!(self, SweepMethod::Overparam | SweepMethod::OverparamSignIn)
    }

    pub fn is_sign_in(self) -> bool {
        matches!(self, SweepMethod::SignIn | SweepMethod::OverparamSignIn)
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Initial sign pattern of `(a, w₁)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    PosPos,
    NegPos,
    PosNeg,
    NegNeg,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::PosPos, Quadrant::NegPos, Quadrant::PosNeg, Quadrant::NegNeg];

    pub fn signs(self) -> (f64, f64) {
        match self {
            Quadrant::PosPos => (1.0, 1.0),
            Quadrant::NegPos => (-1.0, 1.0),
            Quadrant::PosNeg => (1.0, -1.0),
            Quadrant::NegNeg => (-1.0, -1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::PosPos => "(+,+)",
            Quadrant::NegPos => "(-,+)",
            Quadrant::PosNeg => "(+,-)",
            Quadrant::NegNeg => "(-,-)",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gradient-descent student settings shared by the sweep and the recovery table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentSetup {
    pub n_samples: usize,
    pub lr: f64,
    pub steps: usize,
    /// Inner scaling of `a` for Sign-In students.
    pub beta1: f64,
    /// Inner scaling of `w` for Sign-In students.
    pub beta2: f64,
    /// Discrete Sign-In update: factor descent or the metric-scaled step.
    pub sign_in: FlowMethod,
    /// Standard deviation of each inner-weight coordinate at initialization.
    pub init_std: f64,
}

impl StudentSetup {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("lr", "must be positive"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be positive"));
        }
        if !(self.init_std > 0.0) {
            return Err(Error::invalid("init_std", "must be positive"));
        }
        if !self.sign_in.is_sign_in() {
            return Err(Error::invalid("sign_in", "must be a Sign-In update"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub runs: usize,
    /// Input dimension of the overparameterized methods.
    pub d: usize,
    pub methods: Vec<SweepMethod>,
    pub student: StudentSetup,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            d: 5,
            methods: SweepMethod::ALL.to_vec(),
            student: StudentSetup {
                n_samples: 256,
                lr: 0.01,
                steps: 20_000,
                beta1: 2.0,
                beta2: 1.0,
                sign_in: FlowMethod::SignInFactored,
                init_std: 1.0 / 5f64.sqrt(),
            },
            seed: 0,
        }
    }
}

/// Terminal state of one run; one CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: usize,
    pub seed: u64,
    pub method: SweepMethod,
    pub quadrant: Quadrant,
    pub outcome: Outcome,
    pub a_final: f64,
    pub w1_final: f64,
    pub loss_final: f64,
    pub steps: usize,
    /// No sample had a positive first coordinate, so the `d = 1` problem is unlearnable.
    pub degenerate_data: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<RunRow>,
}

impl SweepResult {
    pub fn fraction(&self, method: SweepMethod, quadrant: Quadrant) -> Option<f64> {
        let cell: Vec<_> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.quadrant == quadrant)
            .collect();
        if cell.is_empty() {
            return None;
        }
        let ok = cell.iter().filter(|r| r.outcome == Outcome::Success).count();
        Some(ok as f64 / cell.len() as f64)
    }

    pub fn table(&self, methods: &[SweepMethod]) -> Vec<(SweepMethod, [f64; 4])> {
        methods
            .iter()
            .map(|&m| {
                let mut row = [f64::NAN; 4];
                for q in Quadrant::ALL {
                    row[q.index()] = self.fraction(m, q).unwrap_or(f64::NAN);
                }
                (m, row)
            })
            .collect()
    }
}

/// Balanced init `|a| = ‖w‖` with the requested signs on `a` and `w₁`.
pub fn balanced_init<R: Rng + ?Sized>(d: usize, std: f64, quadrant: Quadrant, rng: &mut R) -> (f64, Vec<f64>) {
    let (sa, sw) = quadrant.signs();
    let mut w: Vec<f64> = (0..d).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
    w[0] = sw * w[0].abs().max(f64::MIN_POSITIVE);
    let a = sa * w.iter().map(|x| x * x).sum::<f64>().sqrt();
    (a, w)
}

struct RunInputs {
    data: NeuronData,
    init_draws: u64,
}

fn student_config(teacher: Teacher, a: f64, w: Vec<f64>, method: FlowMethod, s: &StudentSetup, beta: (f64, f64)) -> NeuronFlowConfig {
    NeuronFlowConfig {
        teacher,
        samples: Samples::Finite(s.n_samples),
        beta1: beta.0,
        beta2: beta.1,
        init_a: a,
        init_w: w,
        step: s.lr,
        max_time: s.lr * s.steps as f64,
        method,
        integrator: super::flow::Integrator::Euler,
        balanced: true,
        data_seed: 0,
        record_every: usize::MAX,
        stop_on_success: true,
    }
}

/// Runs one student from its quadrant's init on given data.
#[allow(clippy::too_many_arguments)]
fn run_one(
    run_id: usize,
    seed: u64,
    method: SweepMethod,
    quadrant: Quadrant,
    d: usize,
    inputs: &RunInputs,
    s: &StudentSetup,
    beta: (f64, f64),
) -> Result<RunRow> {
    let teacher = Teacher::canonical(1.0, d)?;
    let mut rng = rng_for(inputs.init_draws);
    let (a, w) = balanced_init(d, s.init_std, quadrant, &mut rng);
    let flow = if method.is_sign_in() { s.sign_in } else { FlowMethod::Standard };
    let cfg = student_config(teacher, a, w, flow, s, beta);
    let trace = flow_integrate_on(&cfg, &inputs.data)?;
    Ok(RunRow {
        run_id,
        seed,
        method,
        quadrant,
        outcome: trace.outcome,
        a_final: trace.final_a(),
        w1_final: trace.final_w()[0],
        loss_final: trace.final_loss(),
        steps: trace.steps,
        degenerate_data: inputs.data.all_first_nonpositive(),
    })
}

fn inputs_for(seed: u64, d: usize, n: usize) -> Result<RunInputs> {
    let teacher = Teacher::canonical(1.0, d)?;
    let mut rng = rng_for(substream(seed, 0));
    let data = sample_teacher_data(n, d, &teacher, &mut rng)?;
    Ok(RunInputs {
        data,
        init_draws: substream(seed, 1),
    })
}

/// Success fraction per initial sign quadrant for each method.
///
/// Run `r` draws its data and init magnitudes from `seed_spawn(seed, r)`; the four
/// quadrants of a run share them and differ only in the signs.
pub fn quadrant_sweep(cfg: &SweepConfig, exec: Execution) -> Result<SweepResult> {
    if cfg.runs == 0 {
        return Err(Error::invalid("runs", "must be positive"));
    }
    cfg.student.validate()?;
    if cfg.methods.iter().any(|m| m.is_overparam()) && cfg.d < 2 {
        return Err(Error::invalid("d", "overparameterized methods need d > 1"));
    }
    let jobs: Vec<(SweepMethod, Quadrant)> = cfg
        .methods
        .iter()
        .flat_map(|&m| Quadrant::ALL.into_iter().map(move |q| (m, q)))
        .collect();
    let per_run = map_runs(cfg.runs, exec, |r| -> Result<Vec<RunRow>> {
        let seed = seed_spawn(cfg.seed, r as u64);
        let low = inputs_for(seed, 1, cfg.student.n_samples)?;
        let high = if cfg.d > 1 { Some(inputs_for(seed, cfg.d, cfg.student.n_samples)?) } else { None };
        let beta = (cfg.student.beta1, cfg.student.beta2);
        jobs.iter()
            .map(|&(m, q)| {
                let (d, inputs) = if m.is_overparam() { (cfg.d, high.as_ref().expect("d > 1")) } else { (1, &low) };
                run_one(r, seed, m, q, d, inputs, &cfg.student, beta)
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(cfg.runs * jobs.len());
    for chunk in per_run {
        rows.extend(chunk?);
    }
    // Group rows by cell, runs ascending within each cell.
    rows.sort_by_key(|r| (cfg.methods.iter().position(|&m| m == r.method), r.quadrant, r.run_id));
    Ok(SweepResult { rows })
}

/// Sign recovery from `a < 0`, `w₁ > 0` with a shared inner scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub runs: usize,
    pub d: usize,
    pub lr: f64,
    pub max_time: f64,
    /// Hard cap on gradient steps (`min(T/η, cap)` steps are taken).
    pub step_cap: usize,
    pub beta: f64,
    pub sign_in: bool,
    pub n_samples: usize,
    pub init_std: f64,
    pub update: FlowMethod,
    pub seed: u64,
}

impl RecoveryConfig {
    pub fn new(lr: f64, sign_in: bool) -> Self {
        Self {
            runs: 100,
            d: 5,
            lr,
            max_time: 200.0,
            step_cap: 20_000,
            beta: 1.0,
            sign_in,
            n_samples: 64,
            init_std: 1.0,
            update: FlowMethod::SignInFactored,
            seed: 0,
        }
    }

    pub fn steps(&self) -> usize {
        ((self.max_time / self.lr).round() as usize).min(self.step_cap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub rows: Vec<RunRow>,
    pub fraction: f64,
}

/// Fraction of runs started at `a < 0` that end with `a > 0` and pass the success test.
pub fn multi_input_recovery(cfg: &RecoveryConfig, exec: Execution) -> Result<RecoveryResult> {
    if cfg.runs == 0 {
        return Err(Error::invalid("runs", "must be positive"));
    }
    if cfg.d == 0 {
        return Err(Error::invalid("d", "must be positive"));
    }
    let setup = StudentSetup {
        n_samples: cfg.n_samples,
        lr: cfg.lr,
        steps: cfg.steps(),
        beta1: cfg.beta,
        beta2: cfg.beta,
        sign_in: cfg.update,
        init_std: cfg.init_std,
    };
    setup.validate()?;
    let method = match (cfg.d > 1, cfg.sign_in) {
        (true, true) => SweepMethod::OverparamSignIn,
        (true, false) => SweepMethod::Overparam,
        (false, true) => SweepMethod::SignIn,
        (false, false) => SweepMethod::Sparse,
    };
    let rows = map_runs(cfg.runs, exec, |r| -> Result<RunRow> {
        let seed = seed_spawn(cfg.seed, r as u64);
        let inputs = inputs_for(seed, cfg.d, cfg.n_samples)?;
        run_one(r, seed, method, Quadrant::NegPos, cfg.d, &inputs, &setup, (cfg.beta, cfg.beta))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let ok = rows.iter().filter(|r| r.outcome == Outcome::Success && r.a_final > 0.0).count();
    Ok(RecoveryResult {
        fraction: ok as f64 / rows.len() as f64,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_init_has_requested_signs() {
        let mut rng = rng_for(3);
        for q in Quadrant::ALL {
            let (a, w) = balanced_init(5, 0.4, q, &mut rng);
            let (sa, sw) = q.signs();
            assert_eq!(a.signum(), sa);
            assert_eq!(w[0].signum(), sw);
            let nw: f64 = w.iter().map(|x| x * x).sum();
            assert!((a * a - nw).abs() < 1e-12);
        }
    }

    #[test]
    fn small_sweep_matches_sparse_row() {
        let cfg = SweepConfig {
            runs: 8,
            methods: vec![SweepMethod::Sparse],
            ..SweepConfig::default()
        };
        let res = quadrant_sweep(&cfg, Execution::Parallel).unwrap();
        assert_eq!(res.fraction(SweepMethod::Sparse, Quadrant::PosPos), Some(1.0));
        for q in [Quadrant::NegPos, Quadrant::PosNeg, Quadrant::NegNeg] {
            assert_eq!(res.fraction(SweepMethod::Sparse, q), Some(0.0));
        }
    }

    #[test]
    fn rejects_overparam_with_scalar_input() {
        let cfg = SweepConfig {
            d: 1,
            ..SweepConfig::default()
        };
        assert!(quadrant_sweep(&cfg, Execution::Serial).is_err());
    }
}
