use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{MeshFrame, MeshSequence, Topology};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Motion manifest: keyframe rate, per-frame OBJ files (relative to the
/// manifest) and the OBJ group name to segment id map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionManifest {
    pub keyframe_rate_hz: f64,
    pub frames: Vec<PathBuf>,
    #[serde(default)]
    pub segments: BTreeMap<String, u32>,
    /// Explicit timestamps; defaults to `i / keyframe_rate_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamps_s: Option<Vec<f64>>,
}

/// Triangles of one OBJ file with the group name each facet was declared under.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjMesh {
    pub vertices: Vec<Vec3>,
    pub facets: Vec<[u32; 3]>,
    pub facet_groups: Vec<String>,
}

const DEFAULT_GROUP: &str = "default";

/// Parse triangle-only OBJ text. Quads and larger polygons are rejected.
pub fn parse_obj(text: &str, path: &Path) -> Result<ObjMesh> {
    let err = |line: usize, message: String| Error::Obj {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut vertices = Vec::new();
    let mut facets = Vec::new();
    let mut facet_groups = Vec::new();
    let mut group = DEFAULT_GROUP.to_string();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(lineno, format!("bad coordinate `{t}`: {e}"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(err(lineno, "vertex needs 3 coordinates".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(err(
                        lineno,
                        format!("only triangles are supported, face has {} vertices", refs.len()),
                    ));
                }
                let mut tri = [0u32; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    let head = r.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|e| err(lineno, format!("bad vertex reference `{r}`: {e}")))?;
                    let resolved = match i {
                        i if i > 0 => i - 1,
                        i if i < 0 => vertices.len() as i64 + i,
                        _ => return Err(err(lineno, "vertex index 0 is invalid".into())),
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(lineno, format!("vertex index {i} out of range")));
                    }
                    *slot = resolved as u32;
                }
                facets.push(tri);
                facet_groups.push(group.clone());
            }
            Some("g") | Some("o") => {
                group = tokens.next().unwrap_or(DEFAULT_GROUP).to_string();
            }
            _ => {}
        }
    }
    Ok(ObjMesh {
        vertices,
        facets,
        facet_groups,
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Load and validate a mesh sequence from a motion manifest.
pub fn load_mesh_sequence(path: impl AsRef<Path>) -> Result<MeshSequence> {
    let path = path.as_ref();
    let manifest: MotionManifest =
        serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::json(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));

    let timestamps: Vec<f64> = match &manifest.timestamps_s {
        Some(ts) if ts.len() != manifest.frames.len() => {
            return Err(Error::InvalidMesh(format!(
                "{} timestamps for {} frames",
                ts.len(),
                manifest.frames.len()
            )))
        }
        Some(ts) => ts.clone(),
        None => (0..manifest.frames.len())
            .map(|i| i as f64 / manifest.keyframe_rate_hz)
            .collect(),
    };

    let mut topology: Option<Arc<Topology>> = None;
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for (i, (rel, &t)) in manifest.frames.iter().zip(&timestamps).enumerate() {
        let obj_path = base.join(rel);
        let mesh = parse_obj(&read_to_string(&obj_path)?, &obj_path)?;
        let segments = mesh
            .facet_groups
            .iter()
            .map(|g| {
                if manifest.segments.is_empty() {
                    Ok(0)
                } else {
                    manifest.segments.get(g).copied().ok_or_else(|| {
                        Error::InvalidMesh(format!(
                            "group `{g}` in {} has no segment id in the manifest",
                            obj_path.display()
                        ))
                    })
                }
            })
            .collect::<Result<Vec<u32>>>()?;
        let topo = match &topology {
            Some(shared) => {
                if shared.facets != mesh.facets || shared.segment_of_facet != segments {
                    return Err(Error::TopologyMismatch(format!(
                        "frame {i} ({}) has {} facets with different connectivity than frame 0 ({} facets)",
                        obj_path.display(),
                        mesh.facets.len(),
                        shared.facet_count()
                    )));
                }
                Arc::clone(shared)
            }
            None => {
                let t = Arc::new(Topology::new(mesh.facets, segments)?);
                topology = Some(Arc::clone(&t));
                t
            }
        };
        frames.push(MeshFrame::new(t, mesh.vertices, topo)?);
    }
    MeshSequence::new(frames, manifest.keyframe_rate_hz)
}

/// Write a sequence as `motion.json` plus one OBJ per frame under `dir`.
/// Returns the manifest path. Segment `s` is written as group `seg_<s>`.
pub fn save_mesh_sequence(seq: &MeshSequence, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let topo = seq.topology();
    let mut frame_paths = Vec::new();
    for (i, frame) in seq.frames().iter().enumerate() {
        let mut text = String::new();
        for v in &frame.vertices {
            // `{:?}` on f64 is shortest round-trip, so reloading is lossless.
            writeln!(text, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
        }
        let mut current = None;
        for (f, seg) in topo.facets.iter().zip(&topo.segment_of_facet) {
            if current != Some(*seg) {
                writeln!(text, "g seg_{seg}").unwrap();
                current = Some(*seg);
            }
            writeln!(text, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
        }
        let name = PathBuf::from(format!("frame_{i:05}.obj"));
        let p = dir.join(&name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        frame_paths.push(name);
    }
    let rate = seq.keyframe_rate();
    let regular = seq
        .frames()
        .iter()
        .enumerate()
        .all(|(i, f)| f.timestamp == i as f64 / rate);
    let manifest = MotionManifest {
        keyframe_rate_hz: rate,
        frames: frame_paths,
        segments: topo
            .segment_ids()
            .into_iter()
            .map(|s| (format!("seg_{s}"), s))
            .collect(),
        timestamps_s: (!regular).then(|| seq.frames().iter().map(|f| f.timestamp).collect()),
    };
    let path = dir.join("motion.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "# one triangle\nv 0 0 0\nv 1 0 0\nv 0 1 0\ng torso\nf 1 2 3\n";

    fn write_seq(dir: &Path, objs: &[&str], rate: f64) -> PathBuf {
        let mut frames = Vec::new();
        for (i, obj) in objs.iter().enumerate() {
            let name = format!("f{i}.obj");
            fs::write(dir.join(&name), obj).unwrap();
            frames.push(PathBuf::from(name));
        }
        let manifest = MotionManifest {
            keyframe_rate_hz: rate,
            frames,
            segments: [("torso".to_string(), 3)].into_iter().collect(),
            timestamps_s: None,
        };
        let p = dir.join("motion.json");
        fs::write(&p, serde_json::to_string(&manifest).unwrap()).unwrap();
        p
    }

    #[test]
    fn loads_two_frame_triangle() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_seq(dir.path(), &[TRI, TRI], 20.0);
        let seq = load_mesh_sequence(&p).unwrap();
        assert_eq!(seq.frames().len(), 2);
        assert_eq!(seq.keyframe_rate(), 20.0);
        assert_eq!(seq.frames()[1].timestamp, 0.05);
        assert_eq!(seq.topology().segment_of_facet, vec![3]);
    }

    #[test]
    fn vertex_count_mismatch_is_topology_error() {
        let dir = tempfile::tempdir().unwrap();
        let extra = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 5 5\ng torso\nf 1 2 3\n";
        let p = write_seq(dir.path(), &[TRI, extra], 20.0);
        assert!(matches!(load_mesh_sequence(&p), Err(Error::TopologyMismatch(_))));
    }

    #[test]
    fn missing_file_and_quads() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_mesh_sequence(dir.path().join("nope.json")),
            Err(Error::Io { .. })
        ));
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(parse_obj(quad, Path::new("q.obj")), Err(Error::Obj { line: 5, .. })));
    }

    #[test]
    fn non_monotone_manifest_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_seq(dir.path(), &[TRI, TRI], 20.0);
        let mut m: MotionManifest = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        m.timestamps_s = Some(vec![1.0, 0.5]);
        fs::write(&p, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(load_mesh_sequence(&p), Err(Error::NonMonotoneTimestamps(_))));
    }

    #[test]
    fn obj_reference_forms() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1/1 -1//1\n";
        let m = parse_obj(text, Path::new("x.obj")).unwrap();
        assert_eq!(m.facets, vec![[0, 1, 2]]);
        assert_eq!(m.facet_groups, vec!["default".to_string()]);
    }

    #[test]
    fn unmapped_group_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let other = "v 0 0 0\nv 1 0 0\nv 0 1 0\ng arm\nf 1 2 3\n";
        let p = write_seq(dir.path(), &[other, other], 20.0);
        assert!(matches!(load_mesh_sequence(&p), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn save_then_load_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let seq = crate::mesh_motion::procedural::walker(&Default::default()).unwrap();
        let p = save_mesh_sequence(&seq, dir.path()).unwrap();
        let back = load_mesh_sequence(&p).unwrap();
        assert_eq!(back.frames().len(), seq.frames().len());
        for (a, b) in back.frames().iter().zip(seq.frames()) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.timestamp, b.timestamp);
        }
        assert_eq!(**back.topology(), **seq.topology());
    }
}
