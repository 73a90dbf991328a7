//! Generative kernels at toy scale: FAN layers, the state-space model,
//! mixture-of-experts routing, rectified flow, guidance and the contrastive
//! objective, plus two seeded training demos.

mod cfg;
mod contrastive;
mod demo;
mod fan;
mod flow;
mod moe;
mod router;
mod ssm;

pub use cfg::{cfg_coefficients, cfg_field, CfgWeights};
pub use contrastive::{contrastive_pair_loss, total_contrastive};
pub use demo::{
    demo_pose_alignment, demo_toy_flow, energy_distance, synth_pose, DirectedRetrieval, FieldNet,
    FlowDemoConfig, FlowReport, FlowTarget, Mlp, PoseDemoConfig, PoseFamily, PoseItem, PoseReport,
    POSE_FEATURE_DIM,
};
pub use fan::{fan_layer, fan_layer_plain, Activation, FanParams};
pub use flow::{euler_solve, flow_interpolate, rfm_loss, FlowState, GaussianTransport, DEFAULT_EULER_STEPS};
pub use moe::{DramaMoe, FanExpert, MoeDims, MoeOutput, Routing};
pub use router::{
    argmax, gumbel_route, hard_gates, literal_balance_loss, load_balance_loss, soft_gates, RouterState,
    RoutingMode, TemperatureSchedule, DEFAULT_BALANCE_ALPHA, TAU_END, TAU_START,
};
pub use ssm::{
    conv_apply, expm, ssm_kernel, ssm_scan, zoh_discretize, DiscreteSsm, Mat, SsmParams, SERIES_THRESHOLD,
};
