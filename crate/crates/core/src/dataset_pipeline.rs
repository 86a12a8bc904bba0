//! Dataset builds: prompt + motion file in, randomized spectrogram,
//! sampling plan and a JSONL manifest out.
//!
//! A build writes every per-entry file under a `.tmp` name, renames them
//! once all entries are done and writes `manifest.jsonl` last, so a
//! directory with a manifest is always complete.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain_randomization::{apply_nonlinearity, sample_plan, RandomizationConfig, RandomizationPlan};
use crate::em_synthesis::{add_background, synthesize_sequence, IfCube, MaterialModel, SynthesisOptions};
use crate::error::{Error, Result};
use crate::io_util;
use crate::mesh_motion::{gaussian_smooth, load_mesh_sequence, MeshSequence};
use crate::radar_model::{RadarConfig, RadarFile};
use crate::rng;
use crate::scenario_text::{expand_grammar, ScenarioRequest, SynonymLexicon};
use crate::signal_processing::{micro_doppler, to_db, MicroDopplerParams, Provenance, Spectrogram};

pub const SPECTROGRAM_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Typical capture lengths; entries outside this band only log a warning.
pub const DURATION_BAND_S: (f64, f64) = (6.0, 12.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramSidecar {
    pub format_version: u32,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    pub frame_rate_hz: f64,
    pub doppler_resolution_hz: f64,
    pub is_db: bool,
    pub provenance: Option<Provenance>,
}

impl SpectrogramSidecar {
    fn of(s: &Spectrogram) -> Self {
        SpectrogramSidecar {
            format_version: SPECTROGRAM_FORMAT_VERSION,
            height: s.height,
            width: s.width,
            frame_rate_hz: s.frame_rate_hz,
            doppler_resolution_hz: s.doppler_resolution_hz,
            is_db: s.is_db,
            provenance: s.provenance.clone(),
        }
    }
}

fn write_spectrogram_files(s: &Spectrogram, payload: &Path, sidecar: &Path) -> Result<()> {
    s.validate()?;
    io_util::write_f32_le(payload, s.values.iter().map(|&v| v as f32))?;
    io_util::write_json(sidecar, &SpectrogramSidecar::of(s))
}

/// Row-major little-endian float32 payload plus a `.json` sidecar.
pub fn write_spectrogram(s: &Spectrogram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_spectrogram_files(s, path, &io_util::sidecar_path(path))
}

pub fn read_spectrogram_sidecar(path: impl AsRef<Path>) -> Result<SpectrogramSidecar> {
    let side: SpectrogramSidecar = io_util::read_json(&io_util::sidecar_path(path.as_ref()))?;
    if side.format_version != SPECTROGRAM_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: side.format_version,
            expected: SPECTROGRAM_FORMAT_VERSION,
        });
    }
    Ok(side)
}

pub fn read_spectrogram(path: impl AsRef<Path>) -> Result<Spectrogram> {
    let path = path.as_ref();
    let side = read_spectrogram_sidecar(path)?;
    let values = io_util::read_f32_le(path)?;
    if values.len() != side.height * side.width {
        return Err(Error::SizeMismatch {
            expected: side.height * side.width,
            actual: values.len(),
        });
    }
    Ok(Spectrogram {
        height: side.height,
        width: side.width,
        values: values.into_iter().map(f64::from).collect(),
        frame_rate_hz: side.frame_rate_hz,
        doppler_resolution_hz: side.doppler_resolution_hz,
        is_db: side.is_db,
        provenance: side.provenance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colormap {
    #[default]
    Viridis,
    Gray,
}

const VIRIDIS: [[u8; 3]; 11] = [
    [0x44, 0x01, 0x54],
    [0x48, 0x24, 0x75],
    [0x41, 0x44, 0x87],
    [0x35, 0x5f, 0x8d],
    [0x2a, 0x78, 0x8e],
    [0x21, 0x91, 0x8c],
    [0x22, 0xa8, 0x84],
    [0x44, 0xbf, 0x70],
    [0x7a, 0xd1, 0x51],
    [0xbd, 0xdf, 0x26],
    [0xfd, 0xe7, 0x25],
];

impl Colormap {
    /// Colour of `u` in `[0, 1]`.
    pub fn color(self, u: f64) -> [u8; 3] {
        let u = u.clamp(0.0, 1.0);
        match self {
            Colormap::Gray => {
                let g = (u * 255.0).round() as u8;
                [g, g, g]
            }
            Colormap::Viridis => {
                let x = u * (VIRIDIS.len() - 1) as f64;
                let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
                let f = x - i as f64;
                let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
                std::array::from_fn(|c| (a[c] as f64 + f * (b[c] as f64 - a[c] as f64)).round() as u8)
            }
        }
    }
}

/// RGB image with Doppler horizontal and time running down. The minimum
/// maps to the low end of the colormap, the maximum to the high end.
pub fn render_png(s: &Spectrogram, path: impl AsRef<Path>, colormap: Colormap) -> Result<()> {
    let path = path.as_ref();
    s.validate()?;
    let lo = s.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels: Vec<u8> = s
        .values
        .iter()
        .flat_map(|&v| colormap.color(if span > 0.0 { (v - lo) / span } else { 0.0 }))
        .collect();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), s.width as u32, s.height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| Error::Png(e.to_string()))?;
    writer.write_image_data(&pixels).map_err(|e| Error::Png(e.to_string()))?;
    writer.finish().map_err(|e| Error::Png(e.to_string()))
}

/// A config given inline or as a path relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: Default> Default for Source<T> {
    fn default() -> Self {
        Source::Inline(T::default())
    }
}

impl<T: Clone + serde::de::DeserializeOwned> Source<T> {
    fn resolve(&self, base: &Path) -> Result<T> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::Path(p) => io_util::read_json(&base.join(p)),
        }
    }
}

/// Everything between a mesh sequence and its spectrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessingParams {
    /// Temporal smoothing of vertex tracks, in keyframes. 0 disables.
    pub smoothing_sigma_frames: f64,
    pub material: MaterialModel,
    pub synthesis: SynthesisOptions,
    pub micro_doppler: MicroDopplerParams,
    pub floor_db: f64,
}

impl Default for ProcessingParams {
    fn default() -> Self {
        ProcessingParams {
            smoothing_sigma_frames: 1.0,
            material: MaterialModel::default(),
            synthesis: SynthesisOptions::default(),
            micro_doppler: MicroDopplerParams {
                notch_width_bins: 1,
                ..MicroDopplerParams::default()
            },
            floor_db: -160.0,
        }
    }
}

/// Intermediate products of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// IF cube including background.
    pub cube: IfCube,
    /// Linear spectrogram after the nonlinearity.
    pub linear: Spectrogram,
    pub db: Spectrogram,
}

/// Smooth, synthesize, add background, micro-Doppler, nonlinearity, dB.
pub fn run_pipeline(seq: &MeshSequence, radar: &RadarConfig, plan: &RandomizationPlan, params: &ProcessingParams) -> Result<PipelineOutput> {
    let smoothed;
    let seq = if params.smoothing_sigma_frames > 0.0 {
        smoothed = gaussian_smooth(seq, params.smoothing_sigma_frames)?;
        &smoothed
    } else {
        seq
    };
    let cube = synthesize_sequence(
        seq,
        radar,
        &plan.radar_pose,
        &plan.antenna,
        &params.material,
        plan,
        &params.synthesis,
    )?;
    let cube = add_background(&cube, plan)?;
    let linear = apply_nonlinearity(&micro_doppler(&cube, &params.micro_doppler)?, plan.nonlinearity_exponent)?;
    let db = to_db(&linear, params.floor_db)?;
    Ok(PipelineOutput { cube, linear, db })
}

/// Randomization config with nominal beamwidths taken from the radar file.
pub fn randomization_for(radar: &RadarFile, rand: &RandomizationConfig) -> RandomizationConfig {
    let mut r = rand.clone();
    r.nominal.beamwidth_az_deg = radar.antenna.azimuth_beamwidth_deg;
    r.nominal.beamwidth_el_deg = radar.antenna.elevation_beamwidth_deg;
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_request: Option<ScenarioRequest>,
    /// Motion manifest, relative to the spec file.
    pub motion: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(default)]
    pub radar: Source<RadarFile>,
    #[serde(default)]
    pub randomization: Source<RandomizationConfig>,
    #[serde(default)]
    pub processing: ProcessingParams,
    /// Lexicon for `prompt_request` entries; the built-in one if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    pub entries: Vec<SpecEntry>,
}

impl DatasetSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io_util::read_json(path.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format_version: u32,
    pub tool_version: String,
    pub global_seed: u64,
    pub radar_config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub prompt_text: String,
    pub motion_path: PathBuf,
    pub plan_seed: u64,
    /// Relative to the dataset directory.
    pub spectrogram_path: PathBuf,
    pub plan_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestError {
    pub id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ManifestLine {
    Header(ManifestHeader),
    Entry(ManifestEntry),
    Error(ManifestError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
    pub errors: Vec<ManifestError>,
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> String {
        let lines = std::iter::once(ManifestLine::Header(self.header.clone()))
            .chain(self.entries.iter().cloned().map(ManifestLine::Entry))
            .chain(self.errors.iter().cloned().map(ManifestLine::Error));
        let mut out = String::new();
        for l in lines {
            out.push_str(&serde_json::to_string(&l).expect("manifest lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut header = None;
        let (mut entries, mut errors) = (Vec::new(), Vec::new());
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str(line).map_err(|e| Error::json(path, e))? {
                ManifestLine::Header(h) => header = Some(h),
                ManifestLine::Entry(e) => entries.push(e),
                ManifestLine::Error(e) => errors.push(e),
            }
        }
        let header = header.ok_or_else(|| Error::InvalidConfig(format!("{} has no header line", path.display())))?;
        if header.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: header.format_version,
                expected: MANIFEST_FORMAT_VERSION,
            });
        }
        Ok(DatasetManifest { header, entries, errors })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildOptions {
    /// Abort on the first failing entry instead of recording it.
    pub fail_fast: bool,
    /// Worker threads; the global rayon pool when `None`.
    pub threads: Option<usize>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

struct Staged {
    files: Vec<(PathBuf, PathBuf)>,
    entry: ManifestEntry,
}

fn tmp(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".tmp");
    PathBuf::from(s)
}

struct BuildContext<'a> {
    spec: &'a DatasetSpec,
    base: &'a Path,
    out_dir: &'a Path,
    seed: u64,
    radar: RadarFile,
    rand: RandomizationConfig,
    lexicon: SynonymLexicon,
}

impl BuildContext<'_> {
    fn prompt_text(&self, entry: &SpecEntry, entry_seed: u64) -> Result<String> {
        match (&entry.prompt, &entry.prompt_request) {
            (Some(p), None) if !p.trim().is_empty() => Ok(p.clone()),
            (None, Some(req)) => {
                let req = ScenarioRequest { count: 1, ..req.clone() };
                let prompts = expand_grammar(&req, &self.lexicon, entry_seed)?;
                Ok(prompts[0].text.clone())
            }
            _ => Err(Error::InvalidConfig("entry needs exactly one non-empty `prompt` or `prompt_request`".into())),
        }
    }

    fn build_entry(&self, entry: &SpecEntry) -> Result<Staged> {
        let entry_seed = rng::derive_seed(self.seed, &entry.id);
        let prompt_text = self.prompt_text(entry, entry_seed)?;
        let seq = load_mesh_sequence(self.base.join(&entry.motion))?;
        let duration = seq.duration();
        if duration < DURATION_BAND_S.0 || duration > DURATION_BAND_S.1 {
            log::warn!("entry `{}`: {duration:.2} s of motion is outside the usual 6-12 s band", entry.id);
        }
        let plan = sample_plan(&self.rand, entry_seed, &seq.topology().segment_ids())?;
        let out = run_pipeline(&seq, &self.radar.config, &plan, &self.spec.processing)?;

        let spectrogram_rel = PathBuf::from("spectrograms").join(format!("{}.f32", entry.id));
        let sidecar_rel = io_util::sidecar_path(&spectrogram_rel);
        let plan_rel = PathBuf::from("plans").join(format!("{}.json", entry.id));
        let mut files = Vec::new();
        let stage = |rel: &Path, files: &mut Vec<(PathBuf, PathBuf)>| {
            let fin = self.out_dir.join(rel);
            let t = tmp(&fin);
            files.push((t.clone(), fin));
            t
        };
        let (s_tmp, side_tmp, plan_tmp) = (
            stage(&spectrogram_rel, &mut files),
            stage(&sidecar_rel, &mut files),
            stage(&plan_rel, &mut files),
        );
        let written = write_spectrogram_files(&out.db, &s_tmp, &side_tmp).and_then(|_| plan.save(&plan_tmp));
        if let Err(e) = written {
            discard(&files);
            return Err(e);
        }
        Ok(Staged {
            files,
            entry: ManifestEntry {
                id: entry.id.clone(),
                prompt_text,
                motion_path: entry.motion.clone(),
                plan_seed: entry_seed,
                spectrogram_path: spectrogram_rel,
                plan_path: plan_rel,
                label: entry.label.clone(),
                duration_s: duration,
            },
        })
    }
}

fn discard(files: &[(PathBuf, PathBuf)]) {
    for (t, _) in files {
        let _ = fs::remove_file(t);
    }
}

/// Build every entry of the spec at `spec_path` into `out_dir`.
///
/// Entry `id` is randomized with `derive_seed(seed, id)`. Failing entries
/// are listed in the manifest unless `fail_fast` is set, in which case the
/// first failure (in spec order) aborts the build and nothing is committed.
pub fn build_dataset(spec_path: impl AsRef<Path>, out_dir: impl AsRef<Path>, seed: u64, options: BuildOptions) -> Result<DatasetManifest> {
    let spec_path = spec_path.as_ref();
    let out_dir = out_dir.as_ref();
    let spec = DatasetSpec::load(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));

    let mut ids = HashSet::new();
    for e in &spec.entries {
        if !valid_id(&e.id) {
            return Err(Error::InvalidConfig(format!("entry id `{}` is not a safe file name", e.id)));
        }
        if !ids.insert(e.id.as_str()) {
            return Err(Error::InvalidConfig(format!("duplicate entry id `{}`", e.id)));
        }
    }
    let radar = match &spec.radar {
        Source::Path(p) => RadarFile::load(base.join(p))?,
        inline => {
            let r = inline.resolve(base)?;
            r.config.validate()?;
            r.antenna.validate()?;
            r
        }
    };
    let rand = randomization_for(&radar, &spec.randomization.resolve(base)?);
    rand.validate()?;
    let lexicon = match &spec.lexicon {
        Some(p) => SynonymLexicon::load(base.join(p))?,
        None => SynonymLexicon::builtin(),
    };

    for dir in ["spectrograms", "plans"] {
        let d = out_dir.join(dir);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let ctx = BuildContext {
        spec: &spec,
        base,
        out_dir,
        seed,
        radar,
        rand,
        lexicon,
    };
    let run = || -> Vec<Result<Staged>> { spec.entries.par_iter().map(|e| ctx.build_entry(e)).collect() };
    let results = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    if options.fail_fast {
        if let Some((entry, Err(e))) = spec.entries.iter().zip(&results).find(|(_, r)| r.is_err()) {
            for staged in results.iter().flatten() {
                discard(&staged.files);
            }
            return Err(Error::Entry {
                id: entry.id.clone(),
                message: e.to_string(),
            });
        }
    }

    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (spec_entry, r) in spec.entries.iter().zip(results) {
        match r {
            Ok(staged) => {
                for (t, fin) in &staged.files {
                    fs::rename(t, fin).map_err(|e| Error::io(fin, e))?;
                }
                entries.push(staged.entry);
            }
            Err(e) => {
                log::error!("entry `{}` failed: {e}", spec_entry.id);
                errors.push(ManifestError {
                    id: spec_entry.id.clone(),
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }

    let manifest = DatasetManifest {
        header: ManifestHeader {
            format_version: MANIFEST_FORMAT_VERSION,
            tool_version: crate::TOOL_VERSION.to_string(),
            global_seed: seed,
            radar_config_hash: ctx.radar.config.config_hash(),
        },
        entries,
        errors,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let staging = tmp(&path);
    let mut f = fs::File::create(&staging).map_err(|e| Error::io(&staging, e))?;
    f.write_all(manifest.to_jsonl().as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&staging, e))?;
    fs::rename(&staging, &path).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(h: usize, w: usize) -> Spectrogram {
        Spectrogram {
            height: h,
            width: w,
            values: (0..h * w).map(|i| i as f64 * 0.5 - 3.0).collect(),
            frame_rate_hz: 50.0,
            doppler_resolution_hz: 50.0,
            is_db: true,
            provenance: Some(Provenance {
                plan_seed: Some(4),
                config_hash: "abc".into(),
            }),
        }
    }

    #[test]
    fn spectrogram_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.f32");
        let s = sample(3, 4);
        write_spectrogram(&s, &p).unwrap();
        assert_eq!(read_spectrogram(&p).unwrap(), s);
        let side = fs::read_to_string(dir.path().join("s.json")).unwrap();
        assert!(side.contains("\"H\": 3") && side.contains("\"W\": 4"));
    }

    #[test]
    fn truncated_and_mismatched_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.f32");
        write_spectrogram(&sample(3, 4), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(read_spectrogram(&p), Err(Error::SizeMismatch { .. })));
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        let err = read_spectrogram(&p).unwrap_err();
        assert!(matches!(err, Error::SizeMismatch { expected: 12, actual: 10 }));
        let msg = err.to_string();
        assert!(msg.contains("12") && msg.contains("10"), "{msg}");
    }

    #[test]
    fn version_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.f32");
        write_spectrogram(&sample(1, 2), &p).unwrap();
        let side = dir.path().join("s.json");
        let text = fs::read_to_string(&side).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
        fs::write(&side, text).unwrap();
        assert!(matches!(read_spectrogram(&p), Err(Error::VersionMismatch { found: 9, .. })));
    }

    fn decode(path: &Path) -> (png::OutputInfo, Vec<u8>) {
        let decoder = png::Decoder::new(std::io::BufReader::new(fs::File::open(path).unwrap()));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        (info, buf)
    }

    #[test]
    fn png_orientation_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample(300, 128);
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        render_png(&s, &a, Colormap::Viridis).unwrap();
        render_png(&s, &b, Colormap::Viridis).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let (info, pixels) = decode(&a);
        assert_eq!((info.width, info.height), (128, 300));
        assert_eq!(&pixels[..3], &Colormap::Viridis.color(0.0));
        assert_eq!(&pixels[pixels.len() - 3..], &Colormap::Viridis.color(1.0));
    }

    #[test]
    fn constant_png_is_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = sample(4, 5);
        s.values.fill(2.5);
        let p = dir.path().join("c.png");
        render_png(&s, &p, Colormap::Gray).unwrap();
        let (_, pixels) = decode(&p);
        assert!(pixels.chunks(3).all(|c| c == pixels[..3].as_ref()));
    }

    #[test]
    fn colormap_ends() {
        assert_eq!(Colormap::Viridis.color(0.0), [0x44, 0x01, 0x54]);
        assert_eq!(Colormap::Viridis.color(1.0), [0xfd, 0xe7, 0x25]);
        assert_eq!(Colormap::Gray.color(0.5), [128, 128, 128]);
    }

    #[test]
    fn ids_are_file_safe() {
        assert!(valid_id("walk_01.a"));
        assert!(!valid_id("../x"));
        assert!(!valid_id(".hidden"));
        assert!(!valid_id(""));
    }
}
