//! Layers, the Satellite-Net executor, Adam and gradient checking.

pub mod adam;
pub mod arch;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use arch::{ArchitectureSpec, LayerCensus, LayerSpec, SatelliteNetOptions};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport, GradCheckTarget};
pub use network::{build_satellite_net, Network, Tape};
pub use params::{Gradients, ModelParameters, Param, ParamKind};
