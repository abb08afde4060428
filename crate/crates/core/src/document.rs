use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use crate::error::ModelError;
use crate::model::SystemModel;
use crate::xml::{load_model, write_model};

/// The model a session works on, optionally backed by an XML file that every
/// mutation is written back to.
#[derive(Debug, Clone)]
pub struct ModelDocument {
    model: Arc<SystemModel>,
    path: Option<PathBuf>,
}

impl ModelDocument {
    pub fn in_memory(model: SystemModel) -> Self {
        ModelDocument {
            model: Arc::new(model),
            path: None,
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref().to_path_buf();
        Ok(ModelDocument {
            model: Arc::new(load_model(&path)?),
            path: Some(path),
        })
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn snapshot(&self) -> Arc<SystemModel> {
        Arc::clone(&self.model)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn revision(&self) -> u64 {
        self.model.revision()
    }

    /// Installs `next` as the current model, writing it to disk first when the
    /// document is file-backed. On a write error the current model is kept.
    pub fn replace(&mut self, next: SystemModel) -> Result<(), ModelError> {
        if let Some(path) = &self.path {
            write_model(&next, path)?;
        }
        self.model = Arc::new(next);
        Ok(())
    }
}

/// A [`ModelDocument`] shared between sessions. Readers take cheap
/// snapshots; mutations run one at a time against the latest model.
#[derive(Debug)]
pub struct SharedDocument {
    inner: RwLock<ModelDocument>,
}

impl SharedDocument {
    pub fn new(doc: ModelDocument) -> Self {
        SharedDocument {
            inner: RwLock::new(doc),
        }
    }

    fn read(&self) -> RwLockReadGuard<'_, ModelDocument> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, ModelDocument> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn snapshot(&self) -> Arc<SystemModel> {
        self.read().snapshot()
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.read().path().map(Path::to_path_buf)
    }

    pub fn revision(&self) -> u64 {
        self.read().revision()
    }

    /// Computes the next model from the current one and installs it, holding
    /// the write lock throughout so concurrent mutations never interleave.
    pub fn update<E>(
        &self,
        f: impl FnOnce(&SystemModel) -> Result<SystemModel, E>,
    ) -> Result<Arc<SystemModel>, E>
    where
        E: From<ModelError>,
    {
        let mut doc = self.write();
        let next = f(doc.model())?;
        doc.replace(next)?;
        Ok(doc.snapshot())
    }
}

impl From<ModelDocument> for SharedDocument {
    fn from(doc: ModelDocument) -> Self {
        SharedDocument::new(doc)
    }
}
