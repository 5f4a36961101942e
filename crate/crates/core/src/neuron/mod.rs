//! Single- and multi-neuron student-teacher flows with a ReLU activation.

pub mod data;
pub mod field;
pub mod flow;
pub mod multi;
pub mod saddle;
pub mod sweep;

pub use data::{sample_teacher_data, NeuronData, Teacher};
pub use field::{empirical_grads, metric_factor, population_field, FlowMethod, NeuronGrads, PopulationField};
pub use flow::{
    classify_outcome, flow_integrate, flow_integrate_on, is_success, FlowTrace, Integrator, NeuronFlowConfig,
    Outcome, Samples,
};
pub use multi::{cob_init, multineuron_train, MultiNeuronConfig, MultiNeuronResult, MultiTeacher, StudentSigns, TrainMethod};
pub use saddle::{angle_between, numeric_stable_direction, saddle_jacobian, stable_eigenvector, stable_manifold_direction};
pub use sweep::{
    balanced_init, multi_input_recovery, quadrant_sweep, Quadrant, RecoveryConfig, RecoveryResult, RunRow,
    StudentSetup, SweepConfig, SweepMethod, SweepResult,
};
