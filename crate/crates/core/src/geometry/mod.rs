//! Geometry primitives shared by every stage: clouds, meshes, transforms,
//! spatial queries, sampling, canonical placement and rigid registration.

pub mod cloud;
pub mod icp;
pub mod io;
pub mod mesh;
pub mod pca;
pub mod primitives;
pub mod sampling;
pub mod spatial;
pub mod transform;

pub use cloud::{FeatureLabel, PointCloud};
pub use icp::{icp_align, icp_align_indexed, IcpParams, IcpResult};
pub use mesh::TriangleMesh;
pub use pca::weighted_pca_canonicalize;
pub use sampling::{sample_mesh, sample_mesh_with, LabelConfig};
pub use spatial::SpatialIndex;
pub use transform::SimilarityTransform;
