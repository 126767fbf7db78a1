//! Core library for a self-adaptive network digital twin.
//!
//! The crate models a closed control loop around a packet network:
//!
//! * [`topology`] and [`traffic`] describe the network and the offered load,
//! * [`sim`] is the event-driven queueing simulator that produces ground-truth
//!   per-flow delays (the physical side of the twin),
//! * [`features`] turns simulator output into the flow/link hypergraph
//!   consumed by the learned model,
//! * [`vtwin`] is the message-passing delay predictor (the virtual side),
//! * [`train`] fits it with hand-rolled backpropagation and Adam,
//! * [`drift`] watches the traffic stream with a windowed
//!   Kolmogorov-Smirnov detector,
//! * [`sync`] owns the retrain/redeploy lifecycle of the deployed model,
//! * [`store`] persists traffic records, labeled records, and model weights,
//! * [`eval`] computes NMSE and SLA verdicts,
//! * [`scenario`] wires all of the above into reproducible end-to-end runs.

pub mod drift;
pub mod eval;
pub mod features;
pub mod scenario;
pub mod sim;
pub mod store;
pub mod sync;
pub mod topology;
pub mod traffic;
pub mod train;
pub mod vtwin;
