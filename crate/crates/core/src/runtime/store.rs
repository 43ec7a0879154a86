//! Atomic published-parameter store shared between the learner and actors.

use std::sync::{Arc, RwLock};

use crate::policy::ModelParameters;
use crate::Result;

/// Single-writer, many-reader snapshot store. `publish` validates the
/// parameters, stamps them with the next version (previous + 1, regardless of
/// the version the caller set), and swaps the snapshot in atomically; `fetch`
/// hands out a cheap Arc clone that is always internally consistent.
pub struct ParamStore {
    current: RwLock<Arc<ModelParameters>>,
}

impl ParamStore {
    /// Seed the store with initial parameters. Their version is reset to 0:
    /// nothing has been published yet.
    pub fn new(mut initial: ModelParameters) -> Result<Self> {
        initial.validate()?;
        initial.version = 0;
        Ok(Self {
            current: RwLock::new(Arc::new(initial)),
        })
    }

    pub fn publish(&self, mut params: ModelParameters) -> Result<u64> {
        params.validate()?;
        let mut slot = self.current.write().unwrap();
        let next = slot.version + 1;
        params.version = next;
        *slot = Arc::new(params);
        Ok(next)
    }

    pub fn fetch(&self) -> Arc<ModelParameters> {
        Arc::clone(&self.current.read().unwrap())
    }

    pub fn version(&self) -> u64 {
        self.current.read().unwrap().version
    }
}
