//! Dense tensors, feedforward ReLU networks with hand-written reverse mode,
//! and a finite-difference Hessian-vector product.

mod hvp;
mod mlp;
mod optim;
mod tensor;

pub use hvp::{hvp_fd, NetObjective, Objective, Quadratic};
pub use mlp::{
    accuracy, loss_and_grad, loss_and_grads, loss_value, mlp_backward, mlp_forward, ForwardCache, GradStore, Layer,
    Loss, ParamKind, SmallNet, Targets,
};
pub use optim::{sgd_step, sgd_update};
pub use tensor::DenseTensor;
