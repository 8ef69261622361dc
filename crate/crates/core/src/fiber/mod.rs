//! Ground-truth single-span fiber propagation.

pub mod propagate;
pub mod spec;

pub use propagate::{
    adjust_power_db, back_propagate, plan_steps, propagate, propagate_with_steps, set_launch_power, PolarizationMode,
    PropagationConfig,
};
pub use spec::{attenuation_np, beta2_from_dispersion, effective_length, FiberSpec};
