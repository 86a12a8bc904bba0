//! Radar-side facet visibility.
//!
//! Backface culling keeps facets whose normal points toward the radar. The
//! occlusion pass projects the mesh into a 256x256 image from the radar
//! position. Each pixel keeps the facets whose (1-pixel dilated) footprint
//! covers it, sorted by their nearest vertex depth. A facet is visible when no
//! facet from its centroid pixel, nearer than the centroid, intersects the
//! radar-to-centroid segment.

use super::MeshFrame;
use crate::geometry::{Aabb, Vec3};

const IMAGE_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityMode {
    /// Backface culling only.
    BackfaceOnly,
    /// Backface culling plus self-occlusion.
    #[default]
    Occlusion,
}

/// Facets visible from `radar` with backface culling and occlusion.
/// Zero-area facets are never visible. Returned ids are sorted ascending.
pub fn visible_facets(frame: &MeshFrame, radar: Vec3) -> Vec<usize> {
    visible_facets_with(frame, radar, VisibilityMode::Occlusion)
}

struct FacetGeom {
    centroid: Vec3,
    normal: Vec3,
}

pub fn visible_facets_with(frame: &MeshFrame, radar: Vec3, mode: VisibilityMode) -> Vec<usize> {
    let n = frame.facets().len();
    let geoms: Vec<Option<FacetGeom>> = (0..n)
        .map(|f| {
            frame
                .facet_geometry(f)
                .map(|(centroid, normal, _)| FacetGeom { centroid, normal })
        })
        .collect();
    let front: Vec<usize> = geoms
        .iter()
        .enumerate()
        .filter_map(|(i, g)| {
            let g = g.as_ref()?;
            (g.normal.dot(radar - g.centroid) > 0.0).then_some(i)
        })
        .collect();
    if mode == VisibilityMode::BackfaceOnly || front.is_empty() {
        return front;
    }

    let occluders: Vec<usize> = (0..n).filter(|&i| geoms[i].is_some()).collect();
    match Camera::new(frame, radar) {
        Some(cam) => {
            let image = DepthImage::build(frame, &cam, &occluders);
            front
                .into_iter()
                .filter(|&i| {
                    let c = geoms[i].as_ref().unwrap().centroid;
                    let depth = cam.depth(c);
                    image
                        .candidates(cam.pixel_of(c))
                        .iter()
                        .take_while(|(near, _)| *near < depth)
                        .all(|&(_, j)| j as usize == i || !segment_hits(frame, j as usize, radar, c))
                })
                .collect()
        }
        // No projection puts every vertex in front of the radar: test every pair.
        None => front
            .into_iter()
            .filter(|&i| {
                let c = geoms[i].as_ref().unwrap().centroid;
                occluders
                    .iter()
                    .all(|&j| j == i || !segment_hits(frame, j, radar, c))
            })
            .collect(),
    }
}

/// Does facet `j` intersect the open segment from `origin` to `target`?
fn segment_hits(frame: &MeshFrame, j: usize, origin: Vec3, target: Vec3) -> bool {
    const EPS: f64 = 1e-12;
    let [a, b, c] = frame.facet_vertices(j);
    let dir = target - origin;
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < EPS * e1.norm() * e2.norm() * dir.norm() {
        return false;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return false;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return false;
    }
    let t = e2.dot(q) * inv;
    t > 1e-9 && t < 1.0 - 1e-9
}

/// Pinhole projection from the radar position.
struct Camera {
    origin: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    u0: f64,
    v0: f64,
    du: f64,
    dv: f64,
}

impl Camera {
    fn new(frame: &MeshFrame, origin: Vec3) -> Option<Camera> {
        let bbox = Aabb::from_points(&frame.vertices)?;
        if bbox.contains(origin) {
            return None;
        }
        let scale = (bbox.max - bbox.min).norm().max((bbox.center() - origin).norm());
        let min_depth = |fwd: Vec3| {
            frame
                .vertices
                .iter()
                .map(|&v| fwd.dot(v - origin))
                .fold(f64::INFINITY, f64::min)
        };
        let mut forward = (bbox.center() - origin).normalized()?;
        if min_depth(forward) <= 1e-9 * scale {
            // Fall back to the separating axis of the bounding box.
            let (axis, gap, sign) = (0..3)
                .map(|a| {
                    let below = bbox.min.component(a) - origin.component(a);
                    let above = origin.component(a) - bbox.max.component(a);
                    if below >= above {
                        (a, below, 1.0)
                    } else {
                        (a, above, -1.0)
                    }
                })
                .max_by(|x, y| x.1.total_cmp(&y.1))?;
            if gap <= 0.0 {
                return None;
            }
            forward = [Vec3::X, Vec3::Y, Vec3::Z][axis] * sign;
            if min_depth(forward) <= 1e-9 * scale {
                return None;
            }
        }
        let helper = if forward.y.abs() < 0.9 { Vec3::Y } else { Vec3::X };
        let right = forward.cross(helper).normalized()?;
        let up = right.cross(forward);
        let mut cam = Camera {
            origin,
            forward,
            right,
            up,
            u0: 0.0,
            v0: 0.0,
            du: 1.0,
            dv: 1.0,
        };
        let (mut umin, mut umax, mut vmin, mut vmax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &p in &frame.vertices {
            let (u, v) = cam.project(p);
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        let span = (umax - umin).max(vmax - vmin).max(1e-12);
        cam.u0 = umin;
        cam.v0 = vmin;
        cam.du = ((umax - umin).max(span * 1e-6)) / IMAGE_SIZE as f64;
        cam.dv = ((vmax - vmin).max(span * 1e-6)) / IMAGE_SIZE as f64;
        Some(cam)
    }

    #[inline]
    fn depth(&self, p: Vec3) -> f64 {
        self.forward.dot(p - self.origin)
    }

    #[inline]
    fn project(&self, p: Vec3) -> (f64, f64) {
        let d = p - self.origin;
        let z = self.forward.dot(d);
        (self.right.dot(d) / z, self.up.dot(d) / z)
    }

    #[inline]
    fn pixel_f(&self, p: Vec3) -> (f64, f64) {
        let (u, v) = self.project(p);
        ((u - self.u0) / self.du, (v - self.v0) / self.dv)
    }

    fn pixel_of(&self, p: Vec3) -> (usize, usize) {
        let (x, y) = self.pixel_f(p);
        (clamp_px(x.floor()), clamp_px(y.floor()))
    }
}

fn clamp_px(x: f64) -> usize {
    x.max(0.0).min((IMAGE_SIZE - 1) as f64) as usize
}

/// Per-pixel candidate lists in compressed-row form, each sorted by the
/// facet's nearest vertex depth.
struct DepthImage {
    offsets: Vec<u32>,
    entries: Vec<(f64, u32)>,
}

impl DepthImage {
    fn build(frame: &MeshFrame, cam: &Camera, facets: &[usize]) -> DepthImage {
        let footprint = |f: usize| {
            let verts = frame.facet_vertices(f);
            let mut xmin = f64::INFINITY;
            let mut xmax = f64::NEG_INFINITY;
            let mut ymin = f64::INFINITY;
            let mut ymax = f64::NEG_INFINITY;
            let mut near = f64::INFINITY;
            for v in verts {
                let (x, y) = cam.pixel_f(v);
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
                near = near.min(cam.depth(v));
            }
            let x0 = clamp_px(xmin.floor() - 1.0);
            let x1 = clamp_px(xmax.floor() + 1.0);
            let y0 = clamp_px(ymin.floor() - 1.0);
            let y1 = clamp_px(ymax.floor() + 1.0);
            (x0, x1, y0, y1, near)
        };
        let prints: Vec<_> = facets.iter().map(|&f| (f, footprint(f))).collect();

        let mut counts = vec![0u32; IMAGE_SIZE * IMAGE_SIZE + 1];
        for &(_, (x0, x1, y0, y1, _)) in &prints {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    counts[y * IMAGE_SIZE + x + 1] += 1;
                }
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut entries = vec![(0.0, 0u32); *offsets.last().unwrap() as usize];
        for &(f, (x0, x1, y0, y1, near)) in &prints {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let slot = &mut cursor[y * IMAGE_SIZE + x];
                    entries[*slot as usize] = (near, f as u32);
                    *slot += 1;
                }
            }
        }
        for px in 0..IMAGE_SIZE * IMAGE_SIZE {
            entries[offsets[px] as usize..offsets[px + 1] as usize]
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        DepthImage { offsets, entries }
    }

    fn candidates(&self, (x, y): (usize, usize)) -> &[(f64, u32)] {
        let px = y * IMAGE_SIZE + x;
        &self.entries[self.offsets[px] as usize..self.offsets[px + 1] as usize]
    }
}
