//! The prior library: canonical local patches cut from a model database,
//! their moment descriptors, and the exemplar subset chosen by clustering.

mod build;
pub mod format;
mod moments;
mod patch;
mod seeds;

use std::collections::HashSet;

use nalgebra::Point3;

pub use build::{build_library, BuildStats, LibraryParams};
pub use format::{load_library, read_library, save_library, write_library};
pub use moments::{descriptor_len, exponents, moments_descriptor, Descriptor};
pub use patch::{extract_ball, extract_prior, Patch};
pub use seeds::{select_seeds, select_seeds_indexed};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SimilarityTransform, SpatialIndex};

/// One canonical local patch from a database model.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub id: u64,
    pub model_id: u64,
    pub center: Point3<f64>,
    pub points: PointCloud,
    pub to_world: SimilarityTransform,
    pub descriptor: Descriptor,
}

impl Prior {
    pub fn from_patch(id: u64, model_id: u64, patch: Patch) -> Self {
        Self {
            id,
            model_id,
            center: patch.center,
            points: patch.points,
            to_world: patch.to_world,
            descriptor: patch.descriptor,
        }
    }

    pub fn world_points(&self) -> Vec<Point3<f64>> {
        self.points.points().iter().map(|p| self.to_world.apply(p)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PriorLibrary {
    radius_rel: f64,
    moment_order: u32,
    priors: Vec<Prior>,
    exemplar_ids: Vec<u64>,
    /// kd-tree over exemplar descriptors, row `k` ↔ `exemplar_ids[k]`.
    index: Option<SpatialIndex>,
}

impl PartialEq for PriorLibrary {
    fn eq(&self, other: &Self) -> bool {
        self.radius_rel.to_bits() == other.radius_rel.to_bits()
            && self.moment_order == other.moment_order
            && self.priors == other.priors
            && self.exemplar_ids == other.exemplar_ids
    }
}

impl PriorLibrary {
    /// Prior ids must equal their position in `priors`.
    pub fn new(radius_rel: f64, moment_order: u32, priors: Vec<Prior>) -> Result<Self> {
        let len = descriptor_len(moment_order);
        for (i, p) in priors.iter().enumerate() {
            if p.id != i as u64 {
                return Err(Error::InvalidParameter(format!("prior at position {i} has id {}", p.id)));
            }
            if p.descriptor.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: p.descriptor.len(),
                });
            }
        }
        Ok(Self {
            radius_rel,
            moment_order,
            priors,
            exemplar_ids: Vec::new(),
            index: None,
        })
    }

    pub fn radius_rel(&self) -> f64 {
        self.radius_rel
    }

    pub fn moment_order(&self) -> u32 {
        self.moment_order
    }

    pub fn priors(&self) -> &[Prior] {
        &self.priors
    }

    pub fn prior(&self, id: u64) -> Option<&Prior> {
        self.priors.get(id as usize)
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn exemplar_ids(&self) -> &[u64] {
        &self.exemplar_ids
    }

    pub fn exemplars(&self) -> impl Iterator<Item = &Prior> + '_ {
        self.exemplar_ids.iter().map(|&id| &self.priors[id as usize])
    }

    /// Replaces the exemplar subset. Ids must exist and be distinct.
    pub fn set_exemplars(&mut self, ids: Vec<u64>) -> Result<()> {
        let mut seen = HashSet::with_capacity(ids.len());
        for &id in &ids {
            if id as usize >= self.priors.len() {
                return Err(Error::InvalidParameter(format!("exemplar id {id} is not a prior")));
            }
            if !seen.insert(id) {
                return Err(Error::InvalidParameter(format!("exemplar id {id} repeated")));
            }
        }
        self.index = (!ids.is_empty()).then(|| {
            let rows: Vec<&[f64]> = ids
                .iter()
                .map(|&id| self.priors[id as usize].descriptor.values())
                .collect();
            SpatialIndex::from_rows(descriptor_len(self.moment_order), &rows)
        });
        self.exemplar_ids = ids;
        Ok(())
    }

    /// Descriptor index over the exemplars (`None` until exemplars are set).
    pub fn exemplar_index(&self) -> Option<&SpatialIndex> {
        self.index.as_ref()
    }

    pub fn descriptors(&self) -> Vec<&Descriptor> {
        self.priors.iter().map(|p| &p.descriptor).collect()
    }
}
