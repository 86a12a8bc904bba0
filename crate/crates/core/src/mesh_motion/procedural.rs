//! Procedurally animated meshes for demos, benchmarks and tests.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{MeshFrame, MeshSequence, Topology};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// A single triangle of side `size` centred on a trajectory, facing `facing`.
///
/// `position(t)` gives the centroid at time `t`. Keyframes are sampled at
/// `rate` over `[0, duration]`.
pub fn trajectory_facet(
    facing: Vec3,
    size: f64,
    duration: f64,
    rate: f64,
    position: impl Fn(f64) -> Vec3,
) -> Result<MeshSequence> {
    let normal = facing
        .normalized()
        .ok_or_else(|| Error::param("facing", "zero vector"))?;
    let helper = if normal.y.abs() < 0.9 { Vec3::Y } else { Vec3::X };
    let e1 = normal.cross(helper).normalized().unwrap();
    let e2 = normal.cross(e1);
    // Equilateral triangle, counter-clockwise seen from +normal.
    let corners: Vec<Vec3> = (0..3)
        .map(|k| {
            let a = TAU * k as f64 / 3.0;
            (e2 * a.cos() + e1 * a.sin()) * (size / 3f64.sqrt())
        })
        .collect();
    let (a, b, c) = (corners[0], corners[1], corners[2]);
    let tri = if (b - a).cross(c - a).dot(normal) > 0.0 {
        [0, 1, 2]
    } else {
        [0, 2, 1]
    };
    let topo = Arc::new(Topology::new(vec![tri], vec![0])?);
    let n = (duration * rate).round() as usize + 1;
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let p = position(t);
            MeshFrame::new(t, corners.iter().map(|&q| q + p).collect(), Arc::clone(&topo))
        })
        .collect::<Result<Vec<_>>>()?;
    MeshSequence::new(frames, rate)
}

/// Parameters of the procedural walking figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkerParams {
    pub duration_s: f64,
    pub keyframe_rate_hz: f64,
    /// Gait cycles per second.
    pub stride_hz: f64,
    pub speed_m_s: f64,
    /// Walking direction in the ground plane.
    pub heading: Vec3,
    pub start: Vec3,
    pub swing_deg: f64,
    /// Facets around each limb cylinder.
    pub around: u32,
    /// Rings along each limb cylinder.
    pub along: u32,
}

impl Default for WalkerParams {
    fn default() -> Self {
        WalkerParams {
            duration_s: 2.0,
            keyframe_rate_hz: 20.0,
            stride_hz: 1.0,
            speed_m_s: 0.8,
            heading: Vec3::Z,
            start: Vec3::new(0.0, 0.0, -1.0),
            swing_deg: 30.0,
            around: 12,
            along: 4,
        }
    }
}

/// Body segment ids used by [`walker`].
pub mod segment {
    pub const TORSO: u32 = 0;
    pub const HEAD: u32 = 1;
    pub const LEFT_ARM: u32 = 2;
    pub const RIGHT_ARM: u32 = 3;
    pub const LEFT_LEG: u32 = 4;
    pub const RIGHT_LEG: u32 = 5;
}

struct Part {
    segment: u32,
    pivot: Vec3,
    length: f64,
    radius: f64,
    /// Swing phase in units of the swing amplitude, `None` for rigid parts.
    swing: Option<f64>,
}

const PARTS: [Part; 6] = [
    Part { segment: segment::TORSO, pivot: Vec3::new(0.0, 1.45, 0.0), length: 0.6, radius: 0.16, swing: None },
    Part { segment: segment::HEAD, pivot: Vec3::new(0.0, 1.75, 0.0), length: 0.25, radius: 0.1, swing: None },
    Part { segment: segment::LEFT_ARM, pivot: Vec3::new(-0.22, 1.42, 0.0), length: 0.62, radius: 0.045, swing: Some(0.0) },
    Part { segment: segment::RIGHT_ARM, pivot: Vec3::new(0.22, 1.42, 0.0), length: 0.62, radius: 0.045, swing: Some(PI) },
    Part { segment: segment::LEFT_LEG, pivot: Vec3::new(-0.1, 0.85, 0.0), length: 0.85, radius: 0.065, swing: Some(PI) },
    Part { segment: segment::RIGHT_LEG, pivot: Vec3::new(0.1, 0.85, 0.0), length: 0.85, radius: 0.065, swing: Some(0.0) },
];

/// Closed cylinder hanging down (-y) from the origin. Returns local
/// vertices and outward-wound facets.
fn cylinder(length: f64, radius: f64, around: u32, along: u32) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let mut v = Vec::new();
    for j in 0..=along {
        let y = -length * j as f64 / along as f64;
        for i in 0..around {
            let a = TAU * i as f64 / around as f64;
            v.push(Vec3::new(radius * a.cos(), y, radius * a.sin()));
        }
    }
    let top = v.len() as u32;
    v.push(Vec3::ZERO);
    let bottom = v.len() as u32;
    v.push(Vec3::new(0.0, -length, 0.0));
    let mut f = Vec::new();
    for j in 0..along {
        for i in 0..around {
            let a = j * around + i;
            let b = j * around + (i + 1) % around;
            let c = (j + 1) * around + i;
            let d = (j + 1) * around + (i + 1) % around;
            f.push([a, b, c]);
            f.push([b, d, c]);
        }
    }
    for i in 0..around {
        let n = (i + 1) % around;
        f.push([top, n, i]);
        f.push([bottom, along * around + i, along * around + n]);
    }
    (v, f)
}

/// A walking figure built from six cylinders with swinging limbs.
pub fn walker(p: &WalkerParams) -> Result<MeshSequence> {
    if p.around < 3 || p.along < 1 {
        return Err(Error::param("around/along", "need around >= 3 and along >= 1"));
    }
    let heading = Vec3::new(p.heading.x, 0.0, p.heading.z)
        .normalized()
        .ok_or_else(|| Error::param("heading", "must have a ground-plane component"))?;
    // Body frame: local +z is the walking direction.
    let side = Vec3::Y.cross(heading);

    let mut local = Vec::new();
    let mut facets = Vec::new();
    let mut segments = Vec::new();
    let mut owner = Vec::new();
    for (k, part) in PARTS.iter().enumerate() {
        let (v, f) = cylinder(part.length, part.radius, p.around, p.along);
        let base = local.len() as u32;
        local.extend(v);
        owner.extend(std::iter::repeat_n(k, local.len() - base as usize));
        facets.extend(f.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        segments.extend(std::iter::repeat_n(part.segment, f.len()));
    }
    let topo = Arc::new(Topology::new(facets, segments)?);
    let swing = p.swing_deg.to_radians();
    let n = (p.duration_s * p.keyframe_rate_hz).round() as usize + 1;

    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / p.keyframe_rate_hz;
            let root = p.start + heading * (p.speed_m_s * t);
            let vertices = local
                .iter()
                .zip(&owner)
                .map(|(&q, &k)| {
                    let part = &PARTS[k];
                    let theta = part
                        .swing
                        .map_or(0.0, |ph| swing * (TAU * p.stride_hz * t + ph).sin());
                    let (s, c) = theta.sin_cos();
                    // Swing about the local x axis at the pivot.
                    let rotated = Vec3::new(q.x, q.y * c - q.z * s, q.y * s + q.z * c);
                    let body = part.pivot + rotated;
                    root + side * body.x + Vec3::Y * body.y + heading * body.z
                })
                .collect();
            MeshFrame::new(t, vertices, Arc::clone(&topo))
        })
        .collect::<Result<Vec<_>>>()?;
    MeshSequence::new(frames, p.keyframe_rate_hz)
}
