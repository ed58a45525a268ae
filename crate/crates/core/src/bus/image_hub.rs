//! Latest-frame image hub: one slot per camera, single writer, any number
//! of wait-free readers.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use arc_swap::ArcSwapOption;

use crate::vision::ImageFrame;

use super::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageHubError {
    /// The slot is owned by another writer.
    NotOwner { camera: u32, owner: NodeId },
}

impl std::fmt::Display for ImageHubError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NotOwner { camera, owner } => {
                write!(f, "camera {camera} is written by node {owner}")
            }
        }
    }
}

impl std::error::Error for ImageHubError {}

#[derive(Debug)]
struct Slot {
    writer: NodeId,
    seq: AtomicU64,
    frame: ArcSwapOption<(ImageFrame, u64)>,
}

#[derive(Debug, Clone, Default)]
pub struct ImageHub {
    slots: Arc<RwLock<HashMap<u32, Arc<Slot>>>>,
}

impl ImageHub {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&self, camera: u32) -> Option<Arc<Slot>> {
        self.slots
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&camera)
            .cloned()
    }

    /// Stores `frame` as the latest for `camera` and returns its hub
    /// sequence number. The first writer of a camera owns the slot.
    pub fn put(
        &self,
        writer: NodeId,
        camera: u32,
        frame: ImageFrame,
    ) -> Result<u64, ImageHubError> {
        let slot = match self.slot(camera) {
            Some(s) => s,
            None => self
                .slots
                .write()
                .unwrap_or_else(|e| e.into_inner())
                .entry(camera)
                .or_insert_with(|| {
                    Arc::new(Slot {
                        writer,
                        seq: AtomicU64::new(0),
                        frame: ArcSwapOption::empty(),
                    })
                })
                .clone(),
        };
        if slot.writer != writer {
            return Err(ImageHubError::NotOwner {
                camera,
                owner: slot.writer,
            });
        }
        let seq = slot.seq.fetch_add(1, Ordering::AcqRel) + 1;
        slot.frame.store(Some(Arc::new((frame, seq))));
        Ok(seq)
    }

    /// Latest complete frame and its sequence, or `None` before the first put.
    pub fn get_latest(&self, camera: u32) -> Option<(Arc<(ImageFrame, u64)>, u64)> {
        let slot = self.slot(camera)?;
        let f = slot.frame.load_full()?;
        let seq = f.1;
        Some((f, seq))
    }
}
