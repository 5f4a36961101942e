//! The experiment registry: typed parameters, execution and tabular output.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::config::{params_to_map, parse_params, ExperimentConfig};
use super::csv_out::{Cell, CsvTable};
use super::exec::{map_runs, Execution};
use super::seed::{rng_for, seed_spawn, substream};
use crate::autodiff::{Loss, ParamKind, SmallNet};
use crate::error::{Error, Result};
use crate::neuron::{
    balanced_init, flow_integrate, multi_input_recovery, multineuron_train, quadrant_sweep, FlowMethod, Integrator,
    MultiNeuronConfig, NeuronFlowConfig, Outcome, Quadrant, RecoveryConfig, Samples, StudentSetup, StudentSigns,
    SweepConfig, SweepMethod, Teacher, TrainMethod,
};
use crate::sparse::{
    flop_count, layer_sizes, mean_std, random_balanced_mask, run_suite, snip_mask, synflow_mask, two_moons, Arm,
    FlopMode, LayerDescr, MaskGenerator, MaskSpec, SuiteConfig, SuiteResult, TaskKind, TaskSpec, TrainConfig,
};
use crate::reparam::ReparamSchedule;

/// Everything one experiment produces before it touches the disk.
#[derive(Clone, Debug)]
pub struct Artifacts {
    /// `(file name, table)`; the first entry is always `runs.csv`.
    pub tables: Vec<(String, CsvTable)>,
    pub summary: Value,
    /// Parameters after defaults were filled in.
    pub params: Map<String, Value>,
}

/// Executes `cfg.experiment` and returns its tables and summary.
pub fn execute(cfg: &ExperimentConfig, exec: Execution) -> Result<Artifacts> {
    super::config::check_experiment(&cfg.experiment)?;
    let seed = cfg.seed;
    match cfg.experiment.as_str() {
        "quadrant-sweep" => quadrant(parse_params(&cfg.params)?, seed, exec),
        "multi-input" => multi_input(parse_params(&cfg.params)?, seed, exec),
        "flow-trace" => flow_trace(parse_params(&cfg.params)?, seed, exec),
        "multi-neuron" => multi_neuron(parse_params(&cfg.params)?, seed, exec),
        "sparse-train" => sparse_train(parse_params(&cfg.params)?, seed, exec),
        "sharpness" => sharpness_track(parse_params::<SharpnessParams>(&cfg.params)?, seed, exec),
        "masks" => masks(parse_params(&cfg.params)?, seed, exec),
        "flops" => flops(parse_params(&cfg.params)?),
        other => unreachable!("registered experiment without a runner: {other}"),
    }
}

/// Whether the experiment has a `runs` parameter that `--runs` may override.
pub fn accepts_runs(experiment: &str) -> bool {
    !matches!(experiment, "flow-trace" | "flops")
}

fn bad(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(bad(key, "must be positive"))
    } else {
        Ok(())
    }
}

fn outcome_counts<'a>(outcomes: impl Iterator<Item = &'a Outcome>) -> Value {
    let mut counts = std::collections::BTreeMap::new();
    for o in outcomes {
        *counts.entry(o.as_str()).or_insert(0usize) += 1;
    }
    json!(counts)
}

// ---------------------------------------------------------------- quadrant sweep

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrantParams {
    pub runs: usize,
    pub d: usize,
    pub methods: Vec<SweepMethod>,
    pub n_samples: usize,
    pub lr: f64,
    pub steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub update: FlowMethod,
    pub init_std: f64,
}

impl Default for QuadrantParams {
    fn default() -> Self {
        let d = SweepConfig::default();
        Self {
            runs: d.runs,
            d: d.d,
            methods: d.methods,
            n_samples: d.student.n_samples,
            lr: d.student.lr,
            steps: d.student.steps,
            beta1: d.student.beta1,
            beta2: d.student.beta2,
            update: d.student.sign_in,
            init_std: d.student.init_std,
        }
    }
}

const QUADRANT_HEADER: [&str; 9] = [
    "run_id", "seed", "method", "quadrant", "outcome", "a_final", "w1_final", "loss_final", "steps",
];

fn quadrant(p: QuadrantParams, seed: u64, exec: Execution) -> Result<Artifacts> {
    positive("runs", p.runs)?;
    if p.methods.is_empty() {
        return Err(bad("methods", "at least one method is required"));
    }
    let cfg = SweepConfig {
        runs: p.runs,
        d: p.d,
        methods: p.methods.clone(),
        student: StudentSetup {
            n_samples: p.n_samples,
            lr: p.lr,
            steps: p.steps,
            beta1: p.beta1,
            beta2: p.beta2,
            sign_in: p.update,
            init_std: p.init_std,
        },
        seed,
    };
    let res = quadrant_sweep(&cfg, exec)?;
    let mut table = CsvTable::new(&QUADRANT_HEADER);
    for r in &res.rows {
        table.push(vec![
            format!("{}-{}-{}", r.method.as_str(), r.quadrant.as_str(), r.run_id).into(),
            r.seed.into(),
            r.method.as_str().into(),
            r.quadrant.as_str().into(),
            r.outcome.as_str().into(),
            r.a_final.into(),
            r.w1_final.into(),
            r.loss_final.into(),
            r.steps.into(),
        ])?;
    }
    let mut fractions = Map::new();
    for (m, row) in res.table(&p.methods) {
        let cells: Map<String, Value> = Quadrant::ALL
            .iter()
            .map(|q| (q.as_str().to_string(), json!(row[q.index()])))
            .collect();
        fractions.insert(m.as_str().to_string(), Value::Object(cells));
    }
    let degenerate = res.rows.iter().filter(|r| r.degenerate_data).count();
    let summary = json!({
        "success_fraction": fractions,
        "quadrants": Quadrant::ALL.iter().map(|q| q.as_str()).collect::<Vec<_>>(),
        "outcomes": outcome_counts(res.rows.iter().map(|r| &r.outcome)),
        "degenerate_data_runs": degenerate,
    });
    Ok(Artifacts {
        tables: vec![("runs.csv".into(), table)],
        summary,
        params: params_to_map(&p),
    })
}

// ---------------------------------------------------------------- multi-input recovery

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiInputParams {
    pub runs: usize,
    pub d: usize,
    pub lrs: Vec<f64>,
    pub max_time: f64,
    pub step_cap: usize,
    pub beta: f64,
    pub n_samples: usize,
    pub init_std: f64,
    pub update: FlowMethod,
}

impl Default for MultiInputParams {
    fn default() -> Self {
        let r = RecoveryConfig::new(0.01, true);
        Self {
            runs: r.runs,
            d: r.d,
            lrs: vec![0.001, 0.01],
            max_time: r.max_time,
            step_cap: r.step_cap,
            beta: r.beta,
            n_samples: r.n_samples,
            init_std: r.init_std,
            update: r.update,
        }
    }
}

const MULTI_INPUT_HEADER: [&str; 10] = [
    "run_id", "seed", "method", "lr", "outcome", "a_final", "w1_final", "loss_final", "steps", "recovered",
];

fn multi_input(p: MultiInputParams, seed: u64, exec: Execution) -> Result<Artifacts> {
    positive("runs", p.runs)?;
    if p.lrs.is_empty() {
        return Err(bad("lrs", "at least one learning rate is required"));
    }
    let mut table = CsvTable::new(&MULTI_INPUT_HEADER);
    let mut fractions = Map::new();
    for (name, sign_in) in [("standard", false), ("sign-in", true)] {
        let mut per_lr = Map::new();
        for &lr in &p.lrs {
            let cfg = RecoveryConfig {
                runs: p.runs,
                d: p.d,
                lr,
                max_time: p.max_time,
                step_cap: p.step_cap,
                beta: p.beta,
                sign_in,
                n_samples: p.n_samples,
                init_std: p.init_std,
                update: p.update,
                seed,
            };
            let res = multi_input_recovery(&cfg, exec)?;
            for r in &res.rows {
                let recovered = r.outcome == Outcome::Success && r.a_final > 0.0;
                table.push(vec![
                    format!("{name}-{lr}-{}", r.run_id).into(),
                    r.seed.into(),
                    name.into(),
                    lr.into(),
                    r.outcome.as_str().into(),
                    r.a_final.into(),
                    r.w1_final.into(),
                    r.loss_final.into(),
                    r.steps.into(),
                    recovered.into(),
                ])?;
            }
            per_lr.insert(
                lr.to_string(),
                json!({
                    "recovery_fraction": res.fraction,
                    "steps": cfg.steps(),
                    "positive_a_fraction": res.rows.iter().filter(|r| r.a_final > 0.0).count() as f64 / res.rows.len() as f64,
                    "outcomes": outcome_counts(res.rows.iter().map(|r| &r.outcome)),
                }),
            );
        }
        fractions.insert(name.into(), Value::Object(per_lr));
    }
    Ok(Artifacts {
        tables: vec![("runs.csv".into(), table)],
        summary: json!({ "recovery": fractions }),
        params: params_to_map(&p),
    })
}

// ---------------------------------------------------------------- flow trace

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowTraceParams {
    pub d: usize,
    pub methods: Vec<FlowMethod>,
    /// `|a_in| = ‖w_in‖` of every trajectory.
    pub init_norm: f64,
    /// `null` integrates the expected (population) field with RK4.
    pub n_samples: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub step: f64,
    pub max_time: f64,
    pub record_every: usize,
}

impl Default for FlowTraceParams {
    fn default() -> Self {
        Self {
            d: 1,
            methods: vec![FlowMethod::Standard, FlowMethod::SignIn],
            init_norm: 0.9,
            n_samples: Some(64),
            beta1: 2.0,
            beta2: 1.0,
            step: 0.01,
            max_time: 200.0,
            record_every: 10,
        }
    }
}

const FLOW_HEADER: [&str; 9] = ["run_id", "seed", "method", "quadrant", "time", "a", "w1", "w_norm", "loss"];

fn method_name(m: FlowMethod) -> &'static str {
    match m {
        FlowMethod::Standard => "standard",
        FlowMethod::SignIn => "sign-in",
        FlowMethod::SignInFactored => "sign-in-factored",
    }
}

fn flow_trace(p: FlowTraceParams, seed: u64, exec: Execution) -> Result<Artifacts> {
    positive("d", p.d)?;
    if p.methods.is_empty() {
        return Err(bad("methods", "at least one method is required"));
    }
    if !(p.init_norm > 0.0) {
        return Err(bad("init_norm", "must be positive"));
    }
    let jobs: Vec<(FlowMethod, Quadrant)> = p
        .methods
        .iter()
        .flat_map(|&m| Quadrant::ALL.into_iter().map(move |q| (m, q)))
        .collect();
    let mut rng = rng_for(substream(seed, 1));
    let (_, base_w) = balanced_init(p.d, 1.0, Quadrant::PosPos, &mut rng);
    let scale = p.init_norm / base_w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let traces = map_runs(jobs.len(), exec, |j| {
        let (method, quadrant) = jobs[j];
        let (sa, sw) = quadrant.signs();
        let mut w: Vec<f64> = base_w.iter().map(|x| x * scale).collect();
        w[0] = sw * w[0].abs();
        let mut cfg = NeuronFlowConfig::new(sa * p.init_norm, w, method);
        cfg.teacher = Teacher::canonical(1.0, p.d)?;
        cfg.samples = p.n_samples.map_or(Samples::Population, Samples::Finite);
        cfg.integrator = if p.n_samples.is_some() { Integrator::Euler } else { Integrator::Rk4 };
        cfg.beta1 = p.beta1;
        cfg.beta2 = p.beta2;
        cfg.step = p.step;
        cfg.max_time = p.max_time;
        cfg.record_every = p.record_every;
        // Plots show the whole horizon, not just the time to success.
        cfg.stop_on_success = false;
        cfg.data_seed = substream(seed, 0);
        flow_integrate(&cfg).map_err(|e| match e {
            Error::InvalidArgument { name, reason } => bad(name, reason),
            other => other,
        })
    });
    let mut table = CsvTable::new(&FLOW_HEADER);
    let mut outcomes = Map::new();
    for ((method, quadrant), trace) in jobs.iter().zip(traces) {
        let trace = trace?;
        let run_id = format!("{}-{}", method_name(*method), quadrant.as_str());
        for i in 0..trace.times.len() {
            let w = &trace.w[i];
            table.push(vec![
                run_id.clone().into(),
                seed.into(),
                method_name(*method).into(),
                quadrant.as_str().into(),
                trace.times[i].into(),
                trace.a[i].into(),
                w[0].into(),
                w.iter().map(|x| x * x).sum::<f64>().sqrt().into(),
                trace.losses[i].into(),
            ])?;
        }
        outcomes.insert(
            run_id,
            json!({
                "outcome": trace.outcome.as_str(),
                "a_final": trace.final_a(),
                "w1_final": trace.final_w()[0],
                "loss_final": trace.final_loss(),
                "steps": trace.steps,
            }),
        );
    }
    Ok(Artifacts {
        tables: vec![("runs.csv".into(), table)],
        summary: json!({ "trajectories": outcomes }),
        params: params_to_map(&p),
    })
}

// ---------------------------------------------------------------- multi-neuron

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiNeuronParams {
    pub runs: usize,
    pub k: usize,
    pub d: usize,
    pub lr: f64,
    pub epochs: usize,
    pub beta: f64,
    pub beta_inner: f64,
    pub n_samples: usize,
    pub init_scale: f64,
    pub outer_ratio: Option<f64>,
    pub align_inner: bool,
    pub rescale_every: usize,
    pub record_every: usize,
}

impl Default for MultiNeuronParams {
    fn default() -> Self {
        let c = MultiNeuronConfig::default();
        Self {
            runs: 5,
            k: c.k_student,
            d: c.d,
            lr: c.lr,
            epochs: c.epochs,
            beta: c.beta,
            beta_inner: c.beta_inner,
            n_samples: c.n_samples,
            init_scale: c.init_scale,
            outer_ratio: c.outer_ratio,
            align_inner: c.align_inner,
            rescale_every: c.rescale_every,
            record_every: c.record_every,
        }
    }
}

/// The three student cases compared by the multi-neuron experiment.
pub const MULTI_CASES: [(StudentSigns, TrainMethod); 3] = [
    (StudentSigns::Good, TrainMethod::Standard),
    (StudentSigns::Bad, TrainMethod::Standard),
    (StudentSigns::Bad, TrainMethod::SignIn),
];

/// Loss below which a multi-neuron run counts as learned.
pub const MULTI_LEARNED_LOSS: f64 = 1e-3;

fn signs_name(s: StudentSigns) -> &'static str {
    match s {
        StudentSigns::Good => "good",
        StudentSigns::Bad => "bad",
        StudentSigns::Cob => "cob",
    }
}

fn train_name(m: TrainMethod) -> &'static str {
    match m {
        TrainMethod::Standard => "standard",
        TrainMethod::SignIn => "sign-in",
    }
}

const MULTI_HEADER: [&str; 6] = ["run_id", "seed", "signs", "method", "epoch", "loss"];
const NEURON_HEADER: [&str; 9] = ["run_id", "seed", "signs", "method", "role", "neuron", "a", "dim", "value"];

fn multi_neuron(p: MultiNeuronParams, seed: u64, exec: Execution) -> Result<Artifacts> {
    positive("runs", p.runs)?;
    let jobs: Vec<(usize, StudentSigns, TrainMethod)> = (0..p.runs)
        .flat_map(|r| MULTI_CASES.into_iter().map(move |(s, m)| (r, s, m)))
        .collect();
    let results = map_runs(jobs.len(), exec, |j| {
        let (r, signs, method) = jobs[j];
        let cfg = MultiNeuronConfig {
            k_student: p.k,
            k_teacher: p.k,
            d: p.d,
            signs,
            method,
            lr: p.lr,
            epochs: p.epochs,
            beta: p.beta,
            beta_inner: p.beta_inner,
            n_samples: p.n_samples,
            init_scale: p.init_scale,
            outer_ratio: p.outer_ratio,
            align_inner: p.align_inner,
            rescale_every: p.rescale_every,
            seed: seed_spawn(seed, r as u64),
            record_every: p.record_every,
        };
        multineuron_train(&cfg)
    });
    let mut curves = CsvTable::new(&MULTI_HEADER);
    let mut neurons = CsvTable::new(&NEURON_HEADER);
    let mut finals: Vec<Vec<f64>> = vec![Vec::new(); MULTI_CASES.len()];
    for (&(r, signs, method), res) in jobs.iter().zip(results) {
        let res = res?;
        let run_seed = seed_spawn(seed, r as u64);
        let run_id = format!("{}-{}-{r}", signs_name(signs), train_name(method));
        let case = MULTI_CASES.iter().position(|c| *c == (signs, method)).expect("known case");
        finals[case].push(res.final_loss);
        let base = |role: &str| -> Vec<Cell> {
            vec![
                run_id.clone().into(),
                run_seed.into(),
                signs_name(signs).into(),
                train_name(method).into(),
                role.into(),
            ]
        };
        for &(epoch, loss) in &res.loss_curve {
            curves.push(vec![
                run_id.clone().into(),
                run_seed.into(),
                signs_name(signs).into(),
                train_name(method).into(),
                epoch.into(),
                loss.into(),
            ])?;
        }
        let reps = res.representations();
        let groups: [(&str, &[f64], Vec<Vec<f64>>); 3] = [
            ("teacher", &res.teacher.a, res.teacher.w.clone()),
            ("init", &res.init_a, res.init_w.clone()),
            ("final", &res.final_a, reps),
        ];
        for (role, a, rows) in groups {
            for (i, (ai, row)) in a.iter().zip(&rows).enumerate() {
                for (k, v) in row.iter().enumerate() {
                    let mut cells = base(role);
                    cells.extend([Cell::from(i), Cell::from(*ai), Cell::from(k), Cell::from(*v)]);
                    neurons.push(cells)?;
                }
            }
        }
    }
    let mut cases = Map::new();
    for (c, (signs, method)) in MULTI_CASES.iter().enumerate() {
        let (m, s) = mean_std(&finals[c]);
        cases.insert(
            format!("{}-{}", signs_name(*signs), train_name(*method)),
            json!({
                "final_loss": finals[c],
                "final_loss_mean": m,
                "final_loss_std": s,
                "learned_runs": finals[c].iter().filter(|&&l| l < MULTI_LEARNED_LOSS).count(),
            }),
        );
    }
    let gap_runs = (0..p.runs).filter(|&r| finals[1][r] >= 10.0 * finals[2][r]).count();
    let summary = json!({
        "runs": p.runs,
        "learned_loss": MULTI_LEARNED_LOSS,
        "cases": cases,
        "bad_standard_over_sign_in_10x_runs": gap_runs,
    });
    Ok(Artifacts {
        tables: vec![("runs.csv".into(), curves), ("neurons.csv".into(), neurons)],
        summary,
        params: params_to_map(&p),
    })
}

// ---------------------------------------------------------------- sparse training

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseParams {
    pub runs: usize,
    pub hidden: Vec<usize>,
    pub sparsity: f64,
    pub generator: MaskGenerator,
    pub task: TaskKind,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    pub classes: usize,
    pub dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub frobenius_decay: f64,
    pub beta: f64,
    pub rescale_period: usize,
    /// `null`: rescale until the last epoch.
    pub stop_epoch: Option<usize>,
    /// `null`: `⌈epochs/10⌉`.
    pub warmup_epoch: Option<usize>,
    pub sharpness_every: usize,
    pub sharpness_samples: usize,
    pub reinit: bool,
}

impl Default for SparseParams {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            runs: s.seeds,
            hidden: s.hidden,
            sparsity: s.sparsity,
            generator: s.generator,
            task: s.task.kind,
            n_train: s.task.n_train,
            n_test: s.task.n_test,
            noise: s.task.noise,
            classes: s.task.classes,
            dim: s.task.dim,
            lr: s.train.lr,
            epochs: s.train.epochs,
            batch_size: s.train.batch_size,
            weight_decay: s.train.weight_decay,
            frobenius_decay: s.train.frobenius_decay,
            beta: s.train.schedule.beta,
            rescale_period: s.train.schedule.period,
            stop_epoch: None,
            warmup_epoch: None,
            sharpness_every: s.train.sharpness_every,
            sharpness_samples: s.train.sharpness_samples,
            reinit: s.reinit,
        }
    }
}

impl SparseParams {
    pub fn suite(&self, seed: u64) -> Result<SuiteConfig> {
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(bad("sparsity", "must lie in [0, 1)"));
        }
        let base = SuiteConfig::default();
        let train = TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            weight_decay: self.weight_decay,
            frobenius_decay: self.frobenius_decay,
            batch_size: self.batch_size,
            schedule: ReparamSchedule {
                period: self.rescale_period,
                stop_epoch: self.stop_epoch.unwrap_or(self.epochs),
                beta: self.beta,
            },
            warmup_epoch: self.warmup_epoch,
            sharpness_every: self.sharpness_every,
            sharpness_samples: self.sharpness_samples,
            ..base.train
        };
        train.validate().map_err(|e| match e {
            Error::InvalidArgument { name, reason } => bad(name, reason),
            other => other,
        })?;
        Ok(SuiteConfig {
            seeds: self.runs,
            hidden: self.hidden.clone(),
            sparsity: self.sparsity,
            generator: self.generator,
            task: TaskSpec {
                kind: self.task,
                n_train: self.n_train,
                n_test: self.n_test,
                noise: self.noise,
                classes: self.classes,
                dim: self.dim,
            },
            train,
            reinit: self.reinit,
            reinit_init: base.reinit_init,
            seed,
        })
    }
}

pub const SPARSE_HEADER: [&str; 10] = [
    "run_id",
    "seed",
    "epoch",
    "split",
    "loss",
    "accuracy",
    "flip_frac_cum",
    "flips_epoch",
    "sharpness",
    "sparsity",
];

fn sparse_table(res: &SuiteResult) -> Result<CsvTable> {
    let mut table = CsvTable::new(&SPARSE_HEADER);
    for run in &res.runs {
        for (arm, out) in &run.arms {
            let run_id = format!("{}-{}", arm.as_str(), run.index);
            for m in &out.metrics {
                for (split, loss, acc) in [("train", m.train_loss, m.train_accuracy), ("test", m.test_loss, m.test_accuracy)] {
                    table.push(vec![
                        run_id.clone().into(),
                        run.seed.into(),
                        m.epoch.into(),
                        split.into(),
                        loss.into(),
                        acc.into(),
                        m.flip_frac_cum.into(),
                        m.flips_epoch.into(),
                        m.sharpness.into(),
                        m.sparsity.into(),
                    ])?;
                }
            }
        }
    }
    Ok(table)
}

/// Aggregates of a sparse suite: accuracy, flips and sharpness per arm, plus the directional checks.
pub fn sparse_summary(res: &SuiteResult) -> Value {
    let arms: Vec<Arm> = Arm::ALL
        .into_iter()
        .filter(|a| res.runs.first().is_some_and(|r| r.get(*a).is_some()))
        .collect();
    let mut per_arm = Map::new();
    for &arm in &arms {
        let (am, asd) = mean_std(&res.final_accuracies(arm));
        let (sm, ssd) = mean_std(&res.final_sharpness(arm));
        let (fm, fsd) = mean_std(&res.final_flip_fraction(arm));
        let init_final: Vec<f64> = res.runs.iter().filter_map(|r| r.get(arm)).map(|o| o.flips.init_vs_final()).collect();
        let warm_final: Vec<f64> = res
            .runs
            .iter()
            .filter_map(|r| r.get(arm))
            .filter_map(|o| o.flips.warmup_vs_final())
            .collect();
        per_arm.insert(
            arm.as_str().into(),
            json!({
                "test_accuracy_mean": am,
                "test_accuracy_std": asd,
                "sharpness_mean": sm,
                "sharpness_std": ssd,
                "flip_frac_cum_mean": fm,
                "flip_frac_cum_std": fsd,
                "flip_init_vs_final_mean": mean_std(&init_final).0,
                "flip_warmup_vs_final_mean": if warm_final.is_empty() { Value::Null } else { json!(mean_std(&warm_final).0) },
                "mean_flip_curve": res.mean_flip_curve(arm),
            }),
        );
    }
    let acc = |a| mean_std(&res.final_accuracies(a)).0;
    let sharp = |a| mean_std(&res.final_sharpness(a)).0;
    let mut checks = Map::new();
    checks.insert("sign_in_accuracy_ge_plain".into(), json!(acc(Arm::SignIn) >= acc(Arm::Plain)));
    checks.insert("sign_in_flips_gt_plain_after_warmup".into(), json!(res.flips_exceed_after_warmup(Arm::SignIn, Arm::Plain)));
    checks.insert("sign_in_sharpness_le_plain".into(), json!(sharp(Arm::SignIn) <= sharp(Arm::Plain)));
    if arms.contains(&Arm::ReinitSigns) {
        checks.insert("reinit_signs_gt_random".into(), json!(acc(Arm::ReinitSigns) > acc(Arm::ReinitRandom)));
    }
    json!({
        "runs": res.runs.len(),
        "warmup_epoch": res.warmup,
        "sparsity": res.runs.first().map(|r| r.mask.achieved_sparsity()),
        "arms": per_arm,
        "checks": checks,
    })
}

fn sparse_train(p: SparseParams, seed: u64, exec: Execution) -> Result<Artifacts> {
    positive("runs", p.runs)?;
    let res = run_suite(&p.suite(seed)?, exec)?;
    Ok(Artifacts {
        tables: vec![("runs.csv".into(), sparse_table(&res)?)],
        summary: sparse_summary(&res),
        params: params_to_map(&p),
    })
}

// ---------------------------------------------------------------- sharpness tracking

/// Sparse-training parameters with sharpness measured during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SharpnessParams(pub SparseParams);

impl Default for SharpnessParams {
    fn default() -> Self {
        Self(SparseParams {
            runs: 3,
            sharpness_every: 5,
            reinit: false,
            ..SparseParams::default()
        })
    }
}

const SHARPNESS_HEADER: [&str; 7] = ["run_id", "seed", "arm", "epoch", "sharpness", "train_loss", "test_accuracy"];

fn sharpness_track(p: SharpnessParams, seed: u64, exec: Execution) -> Result<Artifacts> {
    let p = p.0;
    positive("runs", p.runs)?;
    let res = run_suite(&p.suite(seed)?, exec)?;
    let mut table = CsvTable::new(&SHARPNESS_HEADER);
    let mut curves = Map::new();
    for &arm in &[Arm::Plain, Arm::SignIn] {
        let mut by_epoch: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for run in &res.runs {
            let out = run.get(arm).expect("both main arms always run");
            for m in &out.metrics {
                if let Some(s) = m.sharpness {
                    by_epoch.entry(m.epoch).or_default().push(s);
                    table.push(vec![
                        format!("{}-{}", arm.as_str(), run.index).into(),
                        run.seed.into(),
                        arm.as_str().into(),
                        m.epoch.into(),
                        s.into(),
                        m.train_loss.into(),
                        m.test_accuracy.into(),
                    ])?;
                }
            }
        }
        let curve: Vec<Value> = by_epoch
            .into_iter()
            .map(|(e, v)| json!({ "epoch": e, "sharpness_mean": mean_std(&v).0, "sharpness_std": mean_std(&v).1 }))
            .collect();
        curves.insert(arm.as_str().into(), Value::Array(curve));
    }
    let terminal = |a| mean_std(&res.final_sharpness(a)).0;
    Ok(Artifacts {
        tables: vec![("runs.csv".into(), table)],
        summary: json!({
            "runs": res.runs.len(),
            "curves": curves,
            "terminal_sharpness_mean": { "plain": terminal(Arm::Plain), "sign-in": terminal(Arm::SignIn) },
        }),
        params: params_to_map(&p),
    })
}

// ---------------------------------------------------------------- masks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskParams {
    pub runs: usize,
    pub sizes: Vec<usize>,
    pub sparsity: f64,
    pub generators: Vec<MaskGenerator>,
    pub synflow_rounds: usize,
    /// Two-moons points scored by SNIP.
    pub snip_batch: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            runs: 3,
            sizes: vec![2, 64, 64, 2],
            sparsity: 0.9,
            generators: vec![MaskGenerator::RandomBalanced, MaskGenerator::Snip, MaskGenerator::Synflow],
            synflow_rounds: 100,
            snip_batch: 256,
        }
    }
}

const MASK_HEADER: [&str; 7] = ["run_id", "seed", "generator", "layer", "size", "kept", "layer_sparsity"];

fn masks(p: MaskParams, seed: u64, exec: Execution) -> Result<Artifacts> {
    positive("runs", p.runs)?;
    positive("synflow_rounds", p.synflow_rounds)?;
    positive("snip_batch", p.snip_batch)?;
    if p.sizes.len() < 2 || p.sizes.contains(&0) {
        return Err(bad("sizes", "need at least two positive layer sizes"));
    }
    if !(0.0..1.0).contains(&p.sparsity) {
        return Err(bad("sparsity", "must lie in [0, 1)"));
    }
    let jobs: Vec<(usize, MaskGenerator)> = (0..p.runs)
        .flat_map(|r| p.generators.iter().map(move |&g| (r, g)))
        .collect();
    let specs = map_runs(jobs.len(), exec, |j| -> Result<MaskSpec> {
        let (r, generator) = jobs[j];
        let s = seed_spawn(seed, r as u64);
        let loss = Loss::CrossEntropy;
        let net = SmallNet::init(&p.sizes, loss, ParamKind::Plain, &mut rng_for(substream(s, 1)))?;
        match generator {
            MaskGenerator::RandomBalanced => random_balanced_mask(&layer_sizes(&net), p.sparsity, substream(s, 2)),
            MaskGenerator::Snip => {
                if p.sizes[0] != 2 {
                    return Err(bad("sizes", "SNIP scores two-moons batches, so the input size must be 2"));
                }
                let classes = *p.sizes.last().expect("checked above");
                if classes < 2 {
                    return Err(bad("sizes", "SNIP needs at least two outputs"));
                }
                let data = two_moons(p.snip_batch, 2, 0.1, substream(s, 0))?;
                snip_mask(&net, &data.train.x, &data.train.targets(), p.sparsity)
            }
            MaskGenerator::Synflow => synflow_mask(&net, p.sparsity, p.synflow_rounds),
        }
    });
    let mut table = CsvTable::new(&MASK_HEADER);
    let mut achieved: Map<String, Value> = Map::new();
    for (&(r, generator), spec) in jobs.iter().zip(specs) {
        let spec = spec?;
        let s = seed_spawn(seed, r as u64);
        for (l, layer) in spec.layers().iter().enumerate() {
            let kept = layer.iter().filter(|&&k| k).count();
            table.push(vec![
                format!("{}-{r}", generator.as_str()).into(),
                s.into(),
                generator.as_str().into(),
                l.into(),
                layer.len().into(),
                kept.into(),
                (1.0 - kept as f64 / layer.len() as f64).into(),
            ])?;
        }
        let entry = achieved
            .entry(generator.as_str().to_string())
            .or_insert_with(|| json!({ "achieved_sparsity": [], "kept": [] }));
        entry["achieved_sparsity"].as_array_mut().expect("array").push(json!(spec.achieved_sparsity()));
        entry["kept"].as_array_mut().expect("array").push(json!(spec.kept()));
    }
    let total: usize = p.sizes.windows(2).map(|w| w[0] * w[1]).sum();
    Ok(Artifacts {
        tables: vec![("runs.csv".into(), table)],
        summary: json!({
            "total_weights": total,
            "target_kept": crate::sparse::kept_count(total, p.sparsity)?,
            "generators": achieved,
        }),
        params: params_to_map(&p),
    })
}

// ---------------------------------------------------------------- flops

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlopParams {
    pub layers: Vec<LayerDescr>,
}

impl Default for FlopParams {
    fn default() -> Self {
        Self {
            layers: vec![
                LayerDescr::Conv { h_out: 32, w_out: 32, c_out: 16, k: 3, c_in: 3 },
                LayerDescr::Conv { h_out: 32, w_out: 32, c_out: 16, k: 3, c_in: 16 },
                LayerDescr::Conv { h_out: 16, w_out: 16, c_out: 32, k: 3, c_in: 16 },
                LayerDescr::Conv { h_out: 8, w_out: 8, c_out: 64, k: 3, c_in: 32 },
                LayerDescr::Linear { m: 10, n: 64 },
            ],
        }
    }
}

const FLOP_HEADER: [&str; 12] = [
    "layer", "kind", "h_out", "w_out", "c_out", "k", "c_in", "m", "n", "plain", "sign_in_training", "inference",
];

fn flops(p: FlopParams) -> Result<Artifacts> {
    if p.layers.is_empty() {
        return Err(bad("layers", "at least one layer is required"));
    }
    let mut table = CsvTable::new(&FLOP_HEADER);
    let mut totals = [0u64; 3];
    for (i, &layer) in p.layers.iter().enumerate() {
        let counts = [FlopMode::Plain, FlopMode::SignInTraining, FlopMode::Inference]
            .map(|m| flop_count(layer, m).map_err(|e| bad("layers", e.to_string())));
        let [a, b, c] = counts;
        let (a, b, c) = (a?, b?, c?);
        totals[0] += a;
        totals[1] += b;
        totals[2] += c;
        let mut row: Vec<Cell> = vec![i.into()];
        match layer {
            LayerDescr::Conv { h_out, w_out, c_out, k, c_in } => {
                row.push("conv".into());
                row.extend([h_out, w_out, c_out, k, c_in].map(Cell::from));
                row.extend([Cell::Empty, Cell::Empty]);
            }
            LayerDescr::Linear { m, n } => {
                row.push("linear".into());
                row.extend(std::iter::repeat_n(Cell::Empty, 5));
                row.extend([Cell::from(m), Cell::from(n)]);
            }
        }
        row.extend([a, b, c].map(Cell::from));
        table.push(row)?;
    }
    Ok(Artifacts {
        tables: vec![("runs.csv".into(), table)],
        summary: json!({
            "total": { "plain": totals[0], "sign-in-training": totals[1], "inference": totals[2] },
            "training_overhead": totals[1] as f64 / totals[0] as f64 - 1.0,
        }),
        params: params_to_map(&p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_experiment_has_default_params() {
        for name in super::super::config::EXPERIMENTS {
            let value = match name {
                "quadrant-sweep" => serde_json::to_value(QuadrantParams::default()),
                "multi-input" => serde_json::to_value(MultiInputParams::default()),
                "flow-trace" => serde_json::to_value(FlowTraceParams::default()),
                "multi-neuron" => serde_json::to_value(MultiNeuronParams::default()),
                "sparse-train" => serde_json::to_value(SparseParams::default()),
                "sharpness" => serde_json::to_value(SharpnessParams::default()),
                "masks" => serde_json::to_value(MaskParams::default()),
                "flops" => serde_json::to_value(FlopParams::default()),
                _ => unreachable!(),
            }
            .unwrap();
            assert!(value.is_object(), "{name}");
        }
    }

    #[test]
    fn flops_defaults_run() {
        let art = execute(&ExperimentConfig::new("flops", 0), Execution::Serial).unwrap();
        assert_eq!(art.tables[0].1.rows.len(), 5);
        assert!(art.summary["training_overhead"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn sweep_method_names_parse() {
        let cfg = ExperimentConfig::new("quadrant-sweep", 0).with_param("methods", json!(["overparam+sign-in"]));
        let p: QuadrantParams = parse_params(&cfg.params).unwrap();
        assert_eq!(p.methods, vec![SweepMethod::OverparamSignIn]);
    }
}
