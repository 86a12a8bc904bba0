//! IF signal synthesis from facet geometry.
//!
//! Each visible facet is one idealized scattering path. Its amplitude is
//! path loss times antenna gain times scattering loss:
//!
//! ```text
//! a = (lambda / 4 pi) * (1 / R^2) * sqrt(C_tx C_rx) * Gamma * sqrt(dA' f_s)
//! ```
//!
//! with `dA' = area * cos(theta)` and `f_s = cos(theta)^k`. The IF samples of
//! one chirp are `x[n] = sum_i a_i exp(j 2 pi tau_i (f_c + S n / f_adc))`.
//! Targets are frozen within a chirp (stop-and-hop); motion shows up as the
//! chirp-to-chirp change of `tau_i`.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use num_complex::{Complex, Complex32, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain_randomization::RandomizationPlan;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io_util;
use crate::mesh_motion::{visible_facets_with, FacetSample, MeshSequence, VisibilityMode};
use crate::radar_model::{AntennaPattern, RadarConfig, RadarPose};
use crate::rng;
use crate::SPEED_OF_LIGHT;

/// Scattering coefficient and Lambertian exponent of the body surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub base_scatter_coeff: f64,
    pub scatter_exponent: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        MaterialModel {
            base_scatter_coeff: 1.0,
            scatter_exponent: 1.0,
        }
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_scatter_coeff >= 0.0) || !(self.scatter_exponent >= 0.0) {
            return Err(Error::param(
                "material",
                "scatter coefficient and exponent must be >= 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetEcho {
    pub amplitude: f64,
    pub delay_s: f64,
    pub segment_id: u32,
}

/// What to do with echoes beyond the unambiguous range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayPolicy {
    #[default]
    Error,
    /// Pull the delay back to just inside the maximum.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub visibility: VisibilityMode,
    pub delay_policy: DelayPolicy,
}

/// Echo of one facet seen from `pose`.
///
/// Back-facing incidence yields zero amplitude. A facet in the rear
/// half-space of the radar is an error.
pub fn facet_echo(
    facet: &FacetSample,
    pose: &RadarPose,
    pattern: &AntennaPattern,
    material: &MaterialModel,
    segment_weight: f64,
    config: &RadarConfig,
) -> Result<FacetEcho> {
    let to_radar = pose.position - facet.centroid;
    let range = to_radar.norm();
    if !(range > 0.0) {
        return Err(Error::ZeroRange);
    }
    if (-to_radar).dot(pose.boresight) <= 0.0 {
        return Err(Error::BehindRadar);
    }
    let cos_inc = (facet.unit_normal.dot(to_radar) / range).clamp(0.0, 1.0);
    let gain = crate::radar_model::antenna_gain(pattern, pose, facet.centroid);
    let projected_area = facet.area * cos_inc;
    let pattern_fn = cos_inc.powf(material.scatter_exponent);
    let lambda = config.wavelength();
    let amplitude = config.tx_power_scale
        * (lambda / (4.0 * PI))
        * (1.0 / (range * range))
        * gain
        * material.base_scatter_coeff
        * segment_weight
        * (projected_area * pattern_fn).sqrt();
    Ok(FacetEcho {
        amplitude,
        delay_s: 2.0 * range / SPEED_OF_LIGHT,
        segment_id: facet.segment_id,
    })
}

/// Start phasor and per-sample rotation of one echo, after applying the
/// delay policy.
#[inline]
fn echo_phasor(amplitude: f64, delay_s: f64, config: &RadarConfig, policy: DelayPolicy) -> Result<(Complex64, Complex64)> {
    let max_delay = config.max_delay();
    let mut tau = delay_s;
    if tau >= max_delay {
        match policy {
            DelayPolicy::Error => {
                return Err(Error::DelayOutOfRange {
                    delay_s: tau,
                    max_delay_s: max_delay,
                })
            }
            DelayPolicy::Clamp => tau = max_delay * (1.0 - 1e-9),
        }
    }
    // Reduce tau * f_c to its fractional cycle before scaling by 2 pi.
    let cycles = (tau * config.carrier_hz).fract();
    let start = Complex64::from_polar(amplitude, TAU * cycles);
    let step = Complex64::from_polar(1.0, TAU * tau * config.sweep_rate_hz_per_s / config.adc_rate_hz);
    Ok((start, step))
}

fn echo_phasors(echoes: &[FacetEcho], config: &RadarConfig, policy: DelayPolicy) -> Result<Vec<(Complex64, Complex64)>> {
    echoes
        .iter()
        .map(|e| echo_phasor(e.amplitude, e.delay_s, config, policy))
        .collect()
}

/// Echoes handled together by the accumulation kernel.
const PACK: usize = 16;
/// Accumulator lanes per sample; lane `l` sums echoes `l` and `l + 8` of
/// every pack.
const LANES: usize = 8;

/// One pack of echo phasors in structure-of-arrays form. Padding slots have
/// zero amplitude.
struct Pack {
    r: [f64; PACK],
    i: [f64; PACK],
    sr: [f64; PACK],
    si: [f64; PACK],
}

impl Pack {
    fn new(phasors: &[(Complex64, Complex64)]) -> Pack {
        let mut p = Pack {
            r: [0.0; PACK],
            i: [0.0; PACK],
            sr: [1.0; PACK],
            si: [0.0; PACK],
        };
        for (l, (start, step)) in phasors.iter().enumerate() {
            (p.r[l], p.i[l], p.sr[l], p.si[l]) = (start.re, start.im, step.re, step.im);
        }
        p
    }
}

/// Sum of rotating phasors, `out[n] += sum_i start_i * step_i^n`.
///
/// Both kernels perform the same IEEE operations in the same order, so the
/// result does not depend on which one runs.
fn accumulate_phasors(phasors: &[(Complex64, Complex64)], out: &mut [Complex64]) {
    // acc[n] holds LANES real parts followed by LANES imaginary parts.
    let mut acc = vec![[0.0f64; 2 * LANES]; out.len()];
    #[cfg(target_arch = "x86_64")]
    let wide = std::is_x86_feature_detected!("avx");
    #[cfg(not(target_arch = "x86_64"))]
    let wide = false;
    for chunk in phasors.chunks(PACK) {
        let pack = Pack::new(chunk);
        if wide {
            #[cfg(target_arch = "x86_64")]
            // SAFETY: AVX support was checked above.
            unsafe {
                accumulate_pack_avx(&pack, &mut acc)
            };
        } else {
            accumulate_pack_scalar(&pack, &mut acc);
        }
    }
    let lane_sum = |v: &[f64]| ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]));
    for (o, a) in out.iter_mut().zip(&acc) {
        o.re += lane_sum(&a[..LANES]);
        o.im += lane_sum(&a[LANES..]);
    }
}

fn accumulate_pack_scalar(pack: &Pack, acc: &mut [[f64; 2 * LANES]]) {
    let (mut r, mut i) = (pack.r, pack.i);
    for a in acc.iter_mut() {
        for l in 0..LANES {
            a[l] = (a[l] + r[l]) + r[l + LANES];
            a[LANES + l] = (a[LANES + l] + i[l]) + i[l + LANES];
        }
        for l in 0..PACK {
            let nr = r[l] * pack.sr[l] - i[l] * pack.si[l];
            let ni = r[l] * pack.si[l] + i[l] * pack.sr[l];
            r[l] = nr;
            i[l] = ni;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn accumulate_pack_avx(pack: &Pack, acc: &mut [[f64; 2 * LANES]]) {
    use std::arch::x86_64::*;
    let ld = |v: &[f64; PACK], q: usize| _mm256_loadu_pd(v[4 * q..].as_ptr());
    let (sr, si) = ([0, 1, 2, 3].map(|q| ld(&pack.sr, q)), [0, 1, 2, 3].map(|q| ld(&pack.si, q)));
    let mut r = [0, 1, 2, 3].map(|q| ld(&pack.r, q));
    let mut i = [0, 1, 2, 3].map(|q| ld(&pack.i, q));
    for a in acc.iter_mut() {
        let p = a.as_mut_ptr();
        // Quads 0 and 1 cover lanes 0..8; quads 2 and 3 the second half of
        // the pack.
        for h in 0..2 {
            let x = _mm256_add_pd(_mm256_add_pd(_mm256_loadu_pd(p.add(4 * h)), r[h]), r[h + 2]);
            _mm256_storeu_pd(p.add(4 * h), x);
            let y = _mm256_add_pd(_mm256_add_pd(_mm256_loadu_pd(p.add(LANES + 4 * h)), i[h]), i[h + 2]);
            _mm256_storeu_pd(p.add(LANES + 4 * h), y);
        }
        for q in 0..4 {
            let nr = _mm256_sub_pd(_mm256_mul_pd(r[q], sr[q]), _mm256_mul_pd(i[q], si[q]));
            let ni = _mm256_add_pd(_mm256_mul_pd(r[q], si[q]), _mm256_mul_pd(i[q], sr[q]));
            r[q] = nr;
            i[q] = ni;
        }
    }
}

/// IF samples of one chirp. Sample `n` is taken at `t = n / adc_rate` after
/// the chirp start.
pub fn synthesize_chirp(echoes: &[FacetEcho], config: &RadarConfig, policy: DelayPolicy) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); config.samples_per_chirp];
    let phasors = echo_phasors(echoes, config, policy)?;
    accumulate_phasors(&phasors, &mut out);
    Ok(out)
}

/// Complex IF samples indexed `[frame][chirp][sample]`, stored as f32.
#[derive(Debug, Clone, PartialEq)]
pub struct IfCube {
    pub frames: usize,
    pub chirps: usize,
    pub samples: usize,
    pub data: Vec<Complex32>,
    pub config: RadarConfig,
    pub plan_seed: Option<u64>,
}

impl IfCube {
    pub fn zeros(frames: usize, config: &RadarConfig) -> IfCube {
        let (chirps, samples) = (config.chirps_per_frame, config.samples_per_chirp);
        IfCube {
            frames,
            chirps,
            samples,
            data: vec![Complex32::new(0.0, 0.0); frames * chirps * samples],
            config: config.clone(),
            plan_seed: None,
        }
    }

    pub fn frame(&self, f: usize) -> &[Complex32] {
        let n = self.chirps * self.samples;
        &self.data[f * n..(f + 1) * n]
    }

    pub fn chirp(&self, f: usize, c: usize) -> &[Complex32] {
        let start = (f * self.chirps + c) * self.samples;
        &self.data[start..start + self.samples]
    }

    pub fn chirp_mut(&mut self, f: usize, c: usize) -> &mut [Complex32] {
        let start = (f * self.chirps + c) * self.samples;
        &mut self.data[start..start + self.samples]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Multiply every sample by a real factor.
    pub fn scaled(&self, k: f32) -> IfCube {
        IfCube {
            data: self.data.iter().map(|z| z * k).collect(),
            ..self.clone()
        }
    }

    /// Start time of chirp `c` of frame `f`, relative to the capture start.
    pub fn chirp_time(&self, f: usize, c: usize) -> f64 {
        f as f64 / self.config.frame_rate_hz + c as f64 * self.config.pri()
    }
}

/// Whole radar frames that fit in the sequence.
pub fn frame_count(seq: &MeshSequence, config: &RadarConfig) -> usize {
    (seq.duration() * config.frame_rate_hz + 1e-9).floor() as usize
}

/// Synthesize the IF cube of an animated mesh.
///
/// Visibility is evaluated at each mesh keyframe and reused until the next
/// one. Echo delays follow the interpolated facet centroid at every chirp
/// start; amplitudes are evaluated at radar frame boundaries and linearly
/// interpolated in between. Segment weights come from `plan`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_sequence(
    seq: &MeshSequence,
    config: &RadarConfig,
    pose: &RadarPose,
    pattern: &AntennaPattern,
    material: &MaterialModel,
    plan: &RandomizationPlan,
    options: &SynthesisOptions,
) -> Result<IfCube> {
    config.validate()?;
    pose.validate()?;
    pattern.validate()?;
    material.validate()?;
    let frames = frame_count(seq, config);
    if frames == 0 {
        return Err(Error::param(
            "sequence",
            format!("{} s of motion is shorter than one radar frame", seq.duration()),
        ));
    }
    let topo = seq.topology();
    let weights = topo
        .segment_of_facet
        .iter()
        .map(|&s| plan.segment_weight(s))
        .collect::<Result<Vec<f64>>>()?;

    let visible: Vec<Vec<usize>> = seq
        .frames()
        .par_iter()
        .map(|f| visible_facets_with(f, pose.position, options.visibility))
        .collect();
    // Centroids are linear in the vertices, so interpolating keyframe
    // centroids gives the exact centroid at any time.
    let facet_count = topo.facet_count();
    let centroids: Vec<Vec<Vec3>> = seq
        .frames()
        .par_iter()
        .map(|fr| {
            (0..facet_count)
                .map(|f| {
                    let [a, b, c] = fr.facet_vertices(f);
                    (a + b + c) / 3.0
                })
                .collect()
        })
        .collect();

    let mut cube = IfCube::zeros(frames, config);
    cube.plan_seed = Some(plan.seed);
    let per_frame = config.chirps_per_frame * config.samples_per_chirp;
    let t0 = seq.start_time();
    let pri = config.pri();
    let frame_time = 1.0 / config.frame_rate_hz;
    let echo_at = |t: f64, facet: usize| -> Result<f64> {
        let (k, alpha) = seq.bracket(t);
        let (k1, alpha1) = seq.bracket(t + pri);
        match seq.facet_sample(k, alpha, k1, alpha1, pri, facet) {
            Some(sample) => Ok(facet_echo(&sample, pose, pattern, material, weights[facet], config)?.amplitude),
            None => Ok(0.0),
        }
    };

    cube.data
        .par_chunks_mut(per_frame)
        .enumerate()
        .try_for_each(|(f, frame_out)| -> Result<()> {
            // Amplitudes vary slowly; evaluate them exactly at both ends of
            // the frame and interpolate across its chirps. Delays are exact
            // at every chirp.
            let t_start = t0 + f as f64 * frame_time;
            let t_end = t_start + frame_time;
            let first_key = seq.bracket(t_start).0;
            let last_key = seq.bracket(t_start + (config.chirps_per_frame - 1) as f64 * pri).0;
            let mut amp = vec![(0.0, 0.0); facet_count];
            let mut seen = vec![false; facet_count];
            for keyframe in &visible[first_key..=last_key] {
                for &facet in keyframe {
                    if !seen[facet] {
                        seen[facet] = true;
                        amp[facet] = (echo_at(t_start, facet)?, echo_at(t_end, facet)?);
                    }
                }
            }
            let mut phasors = Vec::new();
            let mut acc = vec![Complex64::new(0.0, 0.0); config.samples_per_chirp];
            for (c, chirp_out) in frame_out.chunks_mut(config.samples_per_chirp).enumerate() {
                let t = t_start + c as f64 * pri;
                let w = c as f64 / config.chirps_per_frame as f64;
                let (k, alpha) = seq.bracket(t);
                phasors.clear();
                for &facet in &visible[k] {
                    let (a0, a1) = amp[facet];
                    let amplitude = a0 + w * (a1 - a0);
                    if amplitude == 0.0 {
                        continue;
                    }
                    let centroid = centroids[k][facet].lerp(centroids[k + 1][facet], alpha);
                    let delay = 2.0 * (centroid - pose.position).norm() / SPEED_OF_LIGHT;
                    phasors.push(echo_phasor(amplitude, delay, config, options.delay_policy)?);
                }
                acc.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                accumulate_phasors(&phasors, &mut acc);
                for (o, z) in chirp_out.iter_mut().zip(&acc) {
                    *o = Complex::new(z.re as f32, z.im as f32);
                }
            }
            Ok(())
        })?;
    Ok(cube)
}

/// Add thermal noise and static background echoes from `plan`.
///
/// Noise is circular complex Gaussian with `E|n|^2 = noise_std^2`, drawn from
/// the `(plan.seed, frame, chirp)` stream.
pub fn add_background(cube: &IfCube, plan: &RandomizationPlan) -> Result<IfCube> {
    let mut out = cube.clone();
    out.plan_seed = Some(plan.seed);
    if plan.static_scatterers.is_empty() && plan.noise_std == 0.0 {
        return Ok(out);
    }
    let echoes: Vec<FacetEcho> = plan
        .static_scatterers
        .iter()
        .map(|s| {
            let range = (s.position - plan.radar_pose.position).norm();
            FacetEcho {
                amplitude: s.amplitude,
                delay_s: 2.0 * range / SPEED_OF_LIGHT,
                segment_id: u32::MAX,
            }
        })
        .collect();
    let clutter = synthesize_chirp(&echoes, &cube.config, DelayPolicy::Clamp)?;
    let component_std = plan.noise_std / 2f64.sqrt();
    let (chirps, samples) = (cube.chirps, cube.samples);

    out.data
        .par_chunks_mut(chirps * samples)
        .enumerate()
        .for_each(|(f, frame)| {
            for (c, chirp) in frame.chunks_mut(samples).enumerate() {
                let mut stream = rng::stream(plan.seed, "thermal_noise", f as u32, c as u32);
                for (z, bg) in chirp.iter_mut().zip(&clutter) {
                    let mut re = z.re as f64 + bg.re;
                    let mut im = z.im as f64 + bg.im;
                    if plan.noise_std > 0.0 {
                        let (nr, ni): (f64, f64) = (
                            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut stream),
                            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut stream),
                        );
                        re += component_std * nr;
                        im += component_std * ni;
                    }
                    *z = Complex::new(re as f32, im as f32);
                }
            }
        });
    Ok(out)
}

const CUBE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSidecar {
    pub format_version: u32,
    pub frames: usize,
    pub chirps: usize,
    pub samples: usize,
    pub config_hash: String,
    pub plan_seed: Option<u64>,
    pub config: RadarConfig,
}

/// Write interleaved little-endian complex float32 plus a `.json` sidecar.
pub fn write_cube(cube: &IfCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    io_util::write_f32_le(path, cube.data.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>().into_iter())?;
    io_util::write_json(
        &io_util::sidecar_path(path),
        &CubeSidecar {
            format_version: CUBE_FORMAT_VERSION,
            frames: cube.frames,
            chirps: cube.chirps,
            samples: cube.samples,
            config_hash: cube.config.config_hash(),
            plan_seed: cube.plan_seed,
            config: cube.config.clone(),
        },
    )
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<IfCube> {
    let path = path.as_ref();
    let side: CubeSidecar = io_util::read_json(&io_util::sidecar_path(path))?;
    if side.format_version != CUBE_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: side.format_version,
            expected: CUBE_FORMAT_VERSION,
        });
    }
    let raw = io_util::read_f32_le(path)?;
    let expected = 2 * side.frames * side.chirps * side.samples;
    if raw.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            actual: raw.len(),
        });
    }
    Ok(IfCube {
        frames: side.frames,
        chirps: side.chirps,
        samples: side.samples,
        data: raw.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect(),
        config: side.config,
        plan_seed: side.plan_seed,
    })
}

/// Radial speed of a facet relative to the radar, positive when receding.
pub fn radial_velocity(sample: &FacetSample, pose: &RadarPose) -> f64 {
    let d: Vec3 = sample.centroid - pose.position;
    d.normalized().map_or(0.0, |u| sample.velocity.dot(u))
}
