//! Deployment control: an atomically swappable deployed model and a manager
//! that serializes the drift -> retrain -> archive -> swap cycle.
//!
//! The deployed handle hands out `Arc` snapshots. A reader that starts a
//! prediction keeps exactly the parameter set it grabbed, no matter how many
//! redeploys happen mid-flight, so no inference ever observes a mix of two
//! versions. The manager locks the retrain trigger on the first drift event;
//! events arriving while a retrain is in flight are counted and dropped, not
//! queued. New weights are archived before they are swapped in, so every
//! version that ever served is recoverable and the archive has no holes.

use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift::DriftEvent;
use crate::store::{StoreError, WeightsStore};
use crate::vtwin::ModelWeights;

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("no retrain is in flight")]
    NotRetraining,

    #[error("a retrain is in flight")]
    Busy,

    #[error("new weights carry version {got}, expected {want}")]
    VersionSkew { got: u64, want: u64 },

    #[error("weights archive rejected the deployment: {0}")]
    Archive(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Retraining,
}

/// Shared handle to the currently deployed weights. `get` is a snapshot:
/// the returned `Arc` stays valid and unchanged across any number of swaps.
#[derive(Debug, Clone)]
pub struct DeployedModel {
    inner: Arc<RwLock<Arc<ModelWeights>>>,
}

impl DeployedModel {
    pub fn new(w: ModelWeights) -> Self {
        DeployedModel { inner: Arc::new(RwLock::new(Arc::new(w))) }
    }

    pub fn get(&self) -> Arc<ModelWeights> {
        self.inner.read().unwrap().clone()
    }

    pub fn version(&self) -> u64 {
        self.inner.read().unwrap().version
    }

    fn swap(&self, w: Arc<ModelWeights>) {
        *self.inner.write().unwrap() = w;
    }
}

/// Permission to run exactly one retrain, issued by `on_drift` when the
/// trigger was unlocked.
#[derive(Debug, Clone, Copy)]
pub struct RetrainTicket {
    pub event: DriftEvent,
    /// Version deployed at the moment the trigger fired.
    pub base_version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Deployed,
    DriftAccepted,
    DriftSuppressed,
    DeployFailed,
    RolledBack,
}

/// One line of the control log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLogEntry {
    /// Scenario clock, seconds.
    pub timestamp_s: f64,
    pub event: TransitionKind,
    /// Stream index of the sample behind a drift transition.
    pub sample_index: Option<u64>,
    /// Mode after the transition.
    pub mode: Mode,
    /// Deployed version after the transition.
    pub version: u64,
}

struct State {
    mode: Mode,
    suppressed: u64,
    log: Vec<ControlLogEntry>,
}

/// Serializes state transitions of the retrain cycle. Inference does not go
/// through the manager: readers hold the [`DeployedModel`] handle directly
/// and keep serving the old weights while a retrain runs.
pub struct SyncManager {
    deployed: DeployedModel,
    state: Mutex<State>,
}

impl SyncManager {
    /// Wrap an already-deployed model; the initial deployment is logged.
    pub fn new(deployed: DeployedModel, at_s: f64) -> Self {
        let version = deployed.version();
        SyncManager {
            deployed,
            state: Mutex::new(State {
                mode: Mode::Idle,
                suppressed: 0,
                log: vec![ControlLogEntry {
                    timestamp_s: at_s,
                    event: TransitionKind::Deployed,
                    sample_index: None,
                    mode: Mode::Idle,
                    version,
                }],
            }),
        }
    }

    pub fn deployed(&self) -> &DeployedModel {
        &self.deployed
    }

    pub fn mode(&self) -> Mode {
        self.state.lock().unwrap().mode
    }

    /// Drift events dropped because a retrain was already in flight.
    pub fn suppressed(&self) -> u64 {
        self.state.lock().unwrap().suppressed
    }

    pub fn control_log(&self) -> Vec<ControlLogEntry> {
        self.state.lock().unwrap().log.clone()
    }

    /// First drift event locks the trigger and returns a ticket; events
    /// while retraining are counted and dropped.
    pub fn on_drift(&self, event: DriftEvent, at_s: f64) -> Option<RetrainTicket> {
        let mut st = self.state.lock().unwrap();
        let version = self.deployed.version();
        match st.mode {
            Mode::Idle => {
                st.mode = Mode::Retraining;
                st.log.push(ControlLogEntry {
                    timestamp_s: at_s,
                    event: TransitionKind::DriftAccepted,
                    sample_index: Some(event.sample_index),
                    mode: Mode::Retraining,
                    version,
                });
                Some(RetrainTicket { event, base_version: version })
            }
            Mode::Retraining => {
                st.suppressed += 1;
                st.log.push(ControlLogEntry {
                    timestamp_s: at_s,
                    event: TransitionKind::DriftSuppressed,
                    sample_index: Some(event.sample_index),
                    mode: Mode::Retraining,
                    version,
                });
                None
            }
        }
    }

    /// Archive and deploy freshly trained weights. The new version must be
    /// exactly one past the ticket's base. Archiving happens before the
    /// swap; if it fails, the old model keeps serving, the trigger stays
    /// locked, and the caller may retry with the same ticket.
    pub fn complete_retrain(
        &self,
        ticket: &RetrainTicket,
        new_w: &ModelWeights,
        store: &WeightsStore,
        at_s: f64,
    ) -> Result<u64, SyncError> {
        let mut st = self.state.lock().unwrap();
        if st.mode != Mode::Retraining {
            return Err(SyncError::NotRetraining);
        }
        if new_w.version != ticket.base_version + 1 {
            return Err(SyncError::VersionSkew {
                got: new_w.version,
                want: ticket.base_version + 1,
            });
        }
        let arc = Arc::new(new_w.clone());
        if let Err(e) = store.save(&arc, at_s) {
            st.log.push(ControlLogEntry {
                timestamp_s: at_s,
                event: TransitionKind::DeployFailed,
                sample_index: Some(ticket.event.sample_index),
                mode: Mode::Retraining,
                version: self.deployed.version(),
            });
            return Err(e.into());
        }
        self.deployed.swap(arc);
        st.mode = Mode::Idle;
        st.log.push(ControlLogEntry {
            timestamp_s: at_s,
            event: TransitionKind::Deployed,
            sample_index: Some(ticket.event.sample_index),
            mode: Mode::Idle,
            version: new_w.version,
        });
        Ok(new_w.version)
    }

    /// Redeploy an archived version. Only legal while idle; the load is
    /// digest-checked, so the restored model is bit-identical to what was
    /// archived.
    pub fn rollback(
        &self,
        version: u64,
        store: &WeightsStore,
        at_s: f64,
    ) -> Result<(), SyncError> {
        let mut st = self.state.lock().unwrap();
        if st.mode != Mode::Idle {
            return Err(SyncError::Busy);
        }
        let w = store.load(version)?;
        self.deployed.swap(Arc::new(w));
        st.log.push(ControlLogEntry {
            timestamp_s: at_s,
            event: TransitionKind::RolledBack,
            sample_index: None,
            mode: Mode::Idle,
            version,
        });
        Ok(())
    }
}
