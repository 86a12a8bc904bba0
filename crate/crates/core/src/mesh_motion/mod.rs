//! Animated triangle meshes: loading, temporal smoothing, keyframe
//! interpolation, facet kinematics and radar visibility.

mod obj;
pub mod procedural;
mod visibility;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub use obj::{load_mesh_sequence, parse_obj, save_mesh_sequence, MotionManifest, ObjMesh};
pub use visibility::{visible_facets, visible_facets_with, VisibilityMode};

/// Facet connectivity and body-segment labels, shared by every frame of a
/// sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub facets: Vec<[u32; 3]>,
    pub segment_of_facet: Vec<u32>,
}

impl Topology {
    pub fn new(facets: Vec<[u32; 3]>, segment_of_facet: Vec<u32>) -> Result<Self> {
        if facets.len() != segment_of_facet.len() {
            return Err(Error::InvalidMesh(format!(
                "{} facets but {} segment labels",
                facets.len(),
                segment_of_facet.len()
            )));
        }
        Ok(Topology {
            facets,
            segment_of_facet,
        })
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    /// Distinct segment ids in ascending order.
    pub fn segment_ids(&self) -> Vec<u32> {
        let mut ids = self.segment_of_facet.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn max_index(&self) -> Option<u32> {
        self.facets.iter().flatten().copied().max()
    }
}

/// One keyframe of an animated mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFrame {
    pub timestamp: f64,
    pub vertices: Vec<Vec3>,
    pub topology: Arc<Topology>,
}

impl MeshFrame {
    pub fn new(timestamp: f64, vertices: Vec<Vec3>, topology: Arc<Topology>) -> Result<Self> {
        if !timestamp.is_finite() {
            return Err(Error::NonMonotoneTimestamps(format!(
                "non-finite timestamp {timestamp}"
            )));
        }
        if let Some(max) = topology.max_index() {
            if max as usize >= vertices.len() {
                return Err(Error::InvalidMesh(format!(
                    "facet index {max} out of range for {} vertices",
                    vertices.len()
                )));
            }
        }
        if let Some(bad) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {bad} is not finite")));
        }
        Ok(MeshFrame {
            timestamp,
            vertices,
            topology,
        })
    }

    pub fn facets(&self) -> &[[u32; 3]] {
        &self.topology.facets
    }

    pub fn segment_of_facet(&self) -> &[u32] {
        &self.topology.segment_of_facet
    }

    #[inline]
    pub fn facet_vertices(&self, facet: usize) -> [Vec3; 3] {
        let [a, b, c] = self.topology.facets[facet];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Centroid, unit normal (right-handed winding) and area of one facet.
    /// `None` for zero-area facets.
    pub fn facet_geometry(&self, facet: usize) -> Option<(Vec3, Vec3, f64)> {
        triangle_geometry(self.facet_vertices(facet))
    }
}

#[inline]
pub(crate) fn triangle_geometry([a, b, c]: [Vec3; 3]) -> Option<(Vec3, Vec3, f64)> {
    let cross = (b - a).cross(c - a);
    let twice_area = cross.norm();
    if !(twice_area > 0.0) || !twice_area.is_finite() {
        return None;
    }
    let centroid = (a + b + c) / 3.0;
    Some((centroid, cross / twice_area, 0.5 * twice_area))
}

/// Timestamped keyframes with shared topology.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSequence {
    frames: Vec<MeshFrame>,
    keyframe_rate: f64,
}

impl MeshSequence {
    /// Validates: at least two frames, finite strictly increasing timestamps,
    /// identical topology in every frame, positive keyframe rate.
    pub fn new(frames: Vec<MeshFrame>, keyframe_rate: f64) -> Result<Self> {
        if !(keyframe_rate > 0.0) || !keyframe_rate.is_finite() {
            return Err(Error::param("keyframe_rate", format!("must be > 0, got {keyframe_rate}")));
        }
        if frames.len() < 2 {
            return Err(Error::InvalidMesh(format!(
                "a sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let first = &frames[0];
        for (i, f) in frames.iter().enumerate().skip(1) {
            if f.vertices.len() != first.vertices.len() {
                return Err(Error::TopologyMismatch(format!(
                    "frame {i} has {} vertices, frame 0 has {}",
                    f.vertices.len(),
                    first.vertices.len()
                )));
            }
            if !Arc::ptr_eq(&f.topology, &first.topology) && f.topology != first.topology {
                return Err(Error::TopologyMismatch(format!(
                    "frame {i} facets differ from frame 0 ({} vs {} facets)",
                    f.topology.facet_count(),
                    first.topology.facet_count()
                )));
            }
        }
        for (i, w) in frames.windows(2).enumerate() {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(Error::NonMonotoneTimestamps(format!(
                    "frame {} at {} s does not follow frame {} at {} s",
                    i + 1,
                    w[1].timestamp,
                    i,
                    w[0].timestamp
                )));
            }
        }
        Ok(MeshSequence {
            frames,
            keyframe_rate,
        })
    }

    pub fn frames(&self) -> &[MeshFrame] {
        &self.frames
    }

    pub fn keyframe_rate(&self) -> f64 {
        self.keyframe_rate
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.frames[0].topology
    }

    pub fn start_time(&self) -> f64 {
        self.frames[0].timestamp
    }

    pub fn end_time(&self) -> f64 {
        self.frames[self.frames.len() - 1].timestamp
    }

    /// Last minus first timestamp.
    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && t >= self.start_time() && t <= self.end_time() {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                start: self.start_time(),
                end: self.end_time(),
            })
        }
    }

    /// Bracketing keyframe index `k` and blend factor so that `t` lies in
    /// `[frames[k].timestamp, frames[k+1].timestamp)`. At the last keyframe
    /// returns `(len - 2, 1.0)`. Exact keyframe hits return `alpha == 0`.
    pub(crate) fn bracket(&self, t: f64) -> (usize, f64) {
        let n = self.frames.len();
        let k = self
            .frames
            .partition_point(|f| f.timestamp <= t)
            .saturating_sub(1)
            .min(n - 2);
        let (t0, t1) = (self.frames[k].timestamp, self.frames[k + 1].timestamp);
        let alpha = if t >= t1 { 1.0 } else { (t - t0) / (t1 - t0) };
        (k, alpha)
    }

    /// Position of vertex `v` at a bracketed time.
    #[inline]
    pub(crate) fn vertex_at(&self, k: usize, alpha: f64, v: usize) -> Vec3 {
        let a = self.frames[k].vertices[v];
        if alpha == 0.0 {
            return a;
        }
        let b = self.frames[k + 1].vertices[v];
        if alpha == 1.0 {
            return b;
        }
        a.lerp(b, alpha)
    }

    /// Facet geometry at bracket `(k, alpha)` with centroid velocity taken
    /// toward bracket `(k1, alpha1)` over `dt`.
    #[inline]
    pub(crate) fn facet_sample(&self, k: usize, alpha: f64, k1: usize, alpha1: f64, dt: f64, facet: usize) -> Option<FacetSample> {
        let (centroid, unit_normal, area) =
            triangle_geometry(self.facet_vertices_at(k, alpha, facet))?;
        let [p, q, r] = self.facet_vertices_at(k1, alpha1, facet);
        Some(FacetSample {
            facet_id: facet,
            centroid,
            unit_normal,
            area,
            velocity: ((p + q + r) / 3.0 - centroid) / dt,
            segment_id: self.topology().segment_of_facet[facet],
        })
    }

    #[inline]
    pub(crate) fn facet_vertices_at(&self, k: usize, alpha: f64, facet: usize) -> [Vec3; 3] {
        let [a, b, c] = self.topology().facets[facet];
        [
            self.vertex_at(k, alpha, a as usize),
            self.vertex_at(k, alpha, b as usize),
            self.vertex_at(k, alpha, c as usize),
        ]
    }
}

/// Temporal Gaussian filter over frame index.
///
/// The kernel is truncated at `ceil(3 sigma)` frames, normalized, and the
/// sequence is extended by half-sample symmetric reflection at both ends.
/// With that padding the per-vertex temporal mean is preserved.
pub fn gaussian_smooth(seq: &MeshSequence, sigma: f64) -> Result<MeshSequence> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(seq.clone());
    }
    let weights = gaussian_kernel(sigma);
    let radius = (weights.len() / 2) as isize;
    let n = seq.frames.len();
    let nv = seq.frames[0].vertices.len();

    let frames = (0..n)
        .map(|i| {
            let mut vertices = vec![Vec3::ZERO; nv];
            for (w_idx, &w) in weights.iter().enumerate() {
                let src = reflect_index(i as isize + w_idx as isize - radius, n);
                for (acc, &p) in vertices.iter_mut().zip(&seq.frames[src].vertices) {
                    *acc += p * w;
                }
            }
            MeshFrame {
                timestamp: seq.frames[i].timestamp,
                vertices,
                topology: Arc::clone(&seq.frames[i].topology),
            }
        })
        .collect();
    Ok(MeshSequence {
        frames,
        keyframe_rate: seq.keyframe_rate,
    })
}

/// Normalized Gaussian weights for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Linear interpolation between the keyframes bracketing `t`. Keyframe
/// timestamps return that keyframe unchanged.
pub fn interpolate_frame(seq: &MeshSequence, t: f64) -> Result<MeshFrame> {
    seq.check_time(t)?;
    if let Ok(i) = seq
        .frames
        .binary_search_by(|f| f.timestamp.partial_cmp(&t).expect("finite timestamps"))
    {
        return Ok(seq.frames[i].clone());
    }
    let (k, alpha) = seq.bracket(t);
    let (a, b) = (&seq.frames[k], &seq.frames[k + 1]);
    let vertices = a
        .vertices
        .iter()
        .zip(&b.vertices)
        .map(|(&p, &q)| p.lerp(q, alpha))
        .collect();
    Ok(MeshFrame {
        timestamp: t,
        vertices,
        topology: Arc::clone(&a.topology),
    })
}

/// Scattering geometry of one facet at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetSample {
    pub facet_id: usize,
    pub centroid: Vec3,
    pub unit_normal: Vec3,
    pub area: f64,
    pub velocity: Vec3,
    pub segment_id: u32,
}

/// Per-facet geometry at `t` and finite-difference centroid velocity over
/// `[t, t + dt]`. Zero-area facets are omitted.
pub fn facet_kinematics(seq: &MeshSequence, t: f64, dt: f64) -> Result<Vec<FacetSample>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    seq.check_time(t)?;
    seq.check_time(t + dt)?;
    let (k0, a0) = seq.bracket(t);
    let (k1, a1) = seq.bracket(t + dt);
    Ok((0..seq.topology().facet_count())
        .filter_map(|f| seq.facet_sample(k0, a0, k1, a1, dt, f))
        .collect())
}
