//! Seeded sampling of the sim-to-real randomization factors.
//!
//! Five factors are randomized: radar view, per-segment reflectivity,
//! antenna beamwidths, background (thermal noise plus static clutter) and a
//! power-law nonlinearity on the linear spectrogram. Every sampled field
//! draws from its own stream keyed by `(seed, field tag)`, so adding a field
//! never changes the values of the others.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::radar_model::{AntennaPattern, Mount, RadarPose};
use crate::rng;
use crate::signal_processing::Spectrogram;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// `lo + u (hi - lo)`; exactly `lo` for a degenerate interval.
    fn at(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }

    fn check(&self, name: &'static str, min: f64, min_inclusive: bool, max: f64) -> Result<()> {
        let lower_ok = if min_inclusive { self.lo >= min } else { self.lo > min };
        if !(self.lo <= self.hi) || !lower_ok || !(self.hi <= max) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::param(name, format!("invalid interval [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// Inclusive integer interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountInterval {
    pub lo: u32,
    pub hi: u32,
}

/// Which factors are randomized. A disabled factor is pinned to its
/// nominal value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorToggles {
    pub view: bool,
    pub segments: bool,
    pub antenna: bool,
    pub background: bool,
    pub nonlinearity: bool,
}

impl Default for FactorToggles {
    fn default() -> Self {
        FactorToggles::all(true)
    }
}

impl FactorToggles {
    pub const fn all(on: bool) -> Self {
        FactorToggles {
            view: on,
            segments: on,
            antenna: on,
            background: on,
            nonlinearity: on,
        }
    }

    pub fn only(factor: Factor) -> Self {
        let mut t = FactorToggles::all(false);
        match factor {
            Factor::View => t.view = true,
            Factor::Segments => t.segments = true,
            Factor::Antenna => t.antenna = true,
            Factor::Background => t.background = true,
            Factor::Nonlinearity => t.nonlinearity = true,
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    View,
    Segments,
    Antenna,
    Background,
    Nonlinearity,
}

impl Factor {
    pub const ALL: [Factor; 5] = [
        Factor::View,
        Factor::Segments,
        Factor::Antenna,
        Factor::Background,
        Factor::Nonlinearity,
    ];
}

/// Values used when a factor is disabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NominalScene {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance_m: f64,
    pub segment_weight: f64,
    pub beamwidth_az_deg: f64,
    pub beamwidth_el_deg: f64,
    pub nonlinearity_exponent: f64,
}

impl Default for NominalScene {
    fn default() -> Self {
        NominalScene {
            azimuth_deg: 0.0,
            elevation_deg: 0.0,
            distance_m: 3.0,
            segment_weight: 1.0,
            beamwidth_az_deg: 60.0,
            beamwidth_el_deg: 60.0,
            nonlinearity_exponent: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationConfig {
    pub view_azimuth_range_deg: Interval,
    pub view_elevation_range_deg: Interval,
    pub view_distance_range_m: Interval,
    pub segment_weight_range: Interval,
    pub beamwidth_az_range_deg: Interval,
    pub beamwidth_el_range_deg: Interval,
    pub noise_std_range: Interval,
    pub static_scatterer_count_range: CountInterval,
    pub static_amplitude_range: Interval,
    pub nonlinearity_exponent_range: Interval,
    /// Box (relative to `scene_center`) where static scatterers are placed.
    pub scatterer_box_m: [Interval; 3],
    /// Point the radar looks at; the subject stands around it.
    pub scene_center: Vec3,
    pub mount: Mount,
    pub enabled: FactorToggles,
    pub nominal: NominalScene,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            view_azimuth_range_deg: Interval::new(-60.0, 60.0),
            view_elevation_range_deg: Interval::new(-10.0, 10.0),
            view_distance_range_m: Interval::new(1.5, 5.0),
            segment_weight_range: Interval::new(0.5, 1.5),
            beamwidth_az_range_deg: Interval::new(40.0, 100.0),
            beamwidth_el_range_deg: Interval::new(40.0, 100.0),
            noise_std_range: Interval::new(1e-7, 2e-6),
            static_scatterer_count_range: CountInterval { lo: 0, hi: 8 },
            static_amplitude_range: Interval::new(1e-6, 2e-5),
            nonlinearity_exponent_range: Interval::new(0.7, 1.3),
            scatterer_box_m: [Interval::new(-2.0, 2.0), Interval::new(-1.0, 1.5), Interval::new(-2.0, 2.0)],
            scene_center: Vec3::new(0.0, 1.0, 0.0),
            mount: Mount::Upright,
            enabled: FactorToggles::default(),
            nominal: NominalScene::default(),
        }
    }
}

impl RandomizationConfig {
    /// Every interval collapsed onto the nominal scene, zero noise and no
    /// clutter.
    pub fn degenerate(nominal: NominalScene) -> Self {
        RandomizationConfig {
            nominal,
            ..RandomizationConfig::default()
        }
        .with_toggles(FactorToggles::all(false))
        .effective()
    }

    pub fn with_toggles(mut self, enabled: FactorToggles) -> Self {
        self.enabled = enabled;
        self
    }

    /// Copy with disabled factors collapsed to nominal values.
    pub fn effective(&self) -> RandomizationConfig {
        let mut c = self.clone();
        let n = &self.nominal;
        if !self.enabled.view {
            c.view_azimuth_range_deg = Interval::point(n.azimuth_deg);
            c.view_elevation_range_deg = Interval::point(n.elevation_deg);
            c.view_distance_range_m = Interval::point(n.distance_m);
        }
        if !self.enabled.segments {
            c.segment_weight_range = Interval::point(n.segment_weight);
        }
        if !self.enabled.antenna {
            c.beamwidth_az_range_deg = Interval::point(n.beamwidth_az_deg);
            c.beamwidth_el_range_deg = Interval::point(n.beamwidth_el_deg);
        }
        if !self.enabled.background {
            c.noise_std_range = Interval::point(0.0);
            c.static_scatterer_count_range = CountInterval { lo: 0, hi: 0 };
        }
        if !self.enabled.nonlinearity {
            c.nonlinearity_exponent_range = Interval::point(n.nonlinearity_exponent);
        }
        c.enabled = FactorToggles::all(true);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let inf = f64::INFINITY;
        self.view_azimuth_range_deg.check("view_azimuth_range_deg", -360.0, true, 360.0)?;
        self.view_elevation_range_deg.check("view_elevation_range_deg", -89.0, true, 89.0)?;
        self.view_distance_range_m.check("view_distance_range_m", 0.0, false, inf)?;
        self.segment_weight_range.check("segment_weight_range", 0.0, true, inf)?;
        self.beamwidth_az_range_deg.check("beamwidth_az_range_deg", 0.0, false, 180.0)?;
        self.beamwidth_el_range_deg.check("beamwidth_el_range_deg", 0.0, false, 180.0)?;
        self.noise_std_range.check("noise_std_range", 0.0, true, inf)?;
        self.static_amplitude_range.check("static_amplitude_range", 0.0, true, inf)?;
        self.nonlinearity_exponent_range.check("nonlinearity_exponent_range", 0.0, false, inf)?;
        for b in &self.scatterer_box_m {
            b.check("scatterer_box_m", -inf, true, inf)?;
        }
        let c = self.static_scatterer_count_range;
        if c.lo > c.hi {
            return Err(Error::param("static_scatterer_count_range", format!("[{}, {}]", c.lo, c.hi)));
        }
        if !self.scene_center.is_finite() {
            return Err(Error::param("scene_center", "not finite"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let c: RandomizationConfig = crate::io_util::read_json(path.as_ref())?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticScatterer {
    pub position: Vec3,
    pub amplitude: f64,
}

/// One concrete draw of every randomization factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationPlan {
    pub seed: u64,
    pub radar_pose: RadarPose,
    pub segment_weights: BTreeMap<u32, f64>,
    pub antenna: AntennaPattern,
    pub noise_std: f64,
    pub static_scatterers: Vec<StaticScatterer>,
    pub nonlinearity_exponent: f64,
    /// Orbit parameters the pose was built from, when it was sampled.
    pub view: Option<ViewSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSample {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance_m: f64,
}

impl RandomizationPlan {
    pub fn segment_weight(&self, segment_id: u32) -> Result<f64> {
        self.segment_weights
            .get(&segment_id)
            .copied()
            .ok_or(Error::UnknownSegment(segment_id))
    }

    /// Plan with unit weights, no background and identity nonlinearity.
    pub fn fixed(seed: u64, radar_pose: RadarPose, antenna: AntennaPattern, segment_ids: &[u32]) -> Self {
        RandomizationPlan {
            seed,
            radar_pose,
            segment_weights: segment_ids.iter().map(|&s| (s, 1.0)).collect(),
            antenna,
            noise_std: 0.0,
            static_scatterers: Vec::new(),
            nonlinearity_exponent: 1.0,
            view: None,
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::io_util::write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        crate::io_util::read_json(path.as_ref())
    }
}

fn uniform(seed: u64, tag: &str) -> f64 {
    rng::tagged(seed, tag).random::<f64>()
}

/// Sample a plan. Field `x` is drawn from the stream tagged `"x"`; per-item
/// fields (segment weights, scatterers) append the item key to the tag.
pub fn sample_plan(config: &RandomizationConfig, seed: u64, segment_ids: &[u32]) -> Result<RandomizationPlan> {
    config.validate()?;
    if segment_ids.is_empty() {
        return Err(Error::Empty("segment_ids"));
    }
    let c = config.effective();
    let draw = |interval: &Interval, tag: &str| interval.at(uniform(seed, tag));

    let azimuth = draw(&c.view_azimuth_range_deg, "view_azimuth");
    let elevation = draw(&c.view_elevation_range_deg, "view_elevation");
    let distance = draw(&c.view_distance_range_m, "view_distance");
    let radar_pose = RadarPose::orbit(c.scene_center, azimuth, elevation, distance, c.mount)?;

    let segment_weights = segment_ids
        .iter()
        .map(|&s| (s, draw(&c.segment_weight_range, &format!("segment_weight/{s}"))))
        .collect();

    let antenna = AntennaPattern {
        azimuth_beamwidth_deg: draw(&c.beamwidth_az_range_deg, "beamwidth_az"),
        elevation_beamwidth_deg: draw(&c.beamwidth_el_range_deg, "beamwidth_el"),
    };

    let noise_std = draw(&c.noise_std_range, "noise_std");
    let count_range = c.static_scatterer_count_range;
    let count = rng::tagged(seed, "static_count").random_range(count_range.lo..=count_range.hi);
    let static_scatterers = (0..count)
        .map(|i| {
            let p = |axis: usize, name: &str| c.scatterer_box_m[axis].at(uniform(seed, &format!("static/{i}/{name}")));
            StaticScatterer {
                position: c.scene_center + Vec3::new(p(0, "x"), p(1, "y"), p(2, "z")),
                amplitude: draw(&c.static_amplitude_range, &format!("static/{i}/amplitude")),
            }
        })
        .collect();

    Ok(RandomizationPlan {
        seed,
        radar_pose,
        segment_weights,
        antenna,
        noise_std,
        static_scatterers,
        nonlinearity_exponent: draw(&c.nonlinearity_exponent_range, "nonlinearity_exponent"),
        view: Some(ViewSample {
            azimuth_deg: azimuth,
            elevation_deg: elevation,
            distance_m: distance,
        }),
    })
}

/// Max-normalized power law: `v -> (v / max)^gamma * max`. Operates on the
/// linear spectrogram; `gamma == 1` and all-zero inputs are returned as is.
pub fn apply_nonlinearity(s: &Spectrogram, gamma: f64) -> Result<Spectrogram> {
    if s.is_db {
        return Err(Error::ExpectedLinear);
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", format!("must be > 0, got {gamma}")));
    }
    let max = s.values.iter().copied().fold(0.0f64, f64::max);
    if gamma == 1.0 || max <= 0.0 {
        return Ok(s.clone());
    }
    let mut out = s.clone();
    for v in &mut out.values {
        if *v != max {
            *v = (*v / max).powf(gamma) * max;
        }
    }
    Ok(out)
}

/// The multiplier applied to the scattering coefficient of `segment_id`.
pub fn segment_weight(plan: &RandomizationPlan, segment_id: u32) -> Result<f64> {
    plan.segment_weight(segment_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectro(values: Vec<f64>, w: usize) -> Spectrogram {
        Spectrogram {
            height: values.len() / w,
            width: w,
            values,
            frame_rate_hz: 50.0,
            doppler_resolution_hz: 50.0,
            is_db: false,
            provenance: None,
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let c = RandomizationConfig::default();
        let a = sample_plan(&c, 42, &[0, 1, 2]).unwrap();
        let b = sample_plan(&c, 42, &[0, 1, 2]).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let other = sample_plan(&c, 43, &[0, 1, 2]).unwrap();
        assert_ne!(a.view, other.view);
    }

    #[test]
    fn degenerate_intervals_give_fixed_values() {
        let nominal = NominalScene {
            azimuth_deg: 20.0,
            elevation_deg: 5.0,
            distance_m: 2.5,
            segment_weight: 0.8,
            beamwidth_az_deg: 45.0,
            beamwidth_el_deg: 30.0,
            nonlinearity_exponent: 1.1,
        };
        let c = RandomizationConfig::degenerate(nominal);
        let p = sample_plan(&c, 9, &[3, 4]).unwrap();
        assert_eq!(
            p.view,
            Some(ViewSample {
                azimuth_deg: 20.0,
                elevation_deg: 5.0,
                distance_m: 2.5
            })
        );
        assert_eq!(p.segment_weights.values().copied().collect::<Vec<_>>(), vec![0.8, 0.8]);
        assert_eq!(p.antenna.azimuth_beamwidth_deg, 45.0);
        assert_eq!(p.antenna.elevation_beamwidth_deg, 30.0);
        assert_eq!(p.noise_std, 0.0);
        assert!(p.static_scatterers.is_empty());
        assert_eq!(p.nonlinearity_exponent, 1.1);
    }

    #[test]
    fn sampled_values_within_intervals() {
        let c = RandomizationConfig::default();
        for seed in 0..200 {
            let p = sample_plan(&c, seed, &[0, 1, 2, 3, 4, 5]).unwrap();
            let view = p.view.unwrap();
            assert!(c.view_azimuth_range_deg.contains(view.azimuth_deg));
            assert!(c.view_elevation_range_deg.contains(view.elevation_deg));
            assert!(c.view_distance_range_m.contains(view.distance_m));
            assert!(p.segment_weights.values().all(|&w| c.segment_weight_range.contains(w)));
            assert!(c.beamwidth_az_range_deg.contains(p.antenna.azimuth_beamwidth_deg));
            assert!(c.noise_std_range.contains(p.noise_std));
            assert!(p.static_scatterers.len() <= 8);
            assert!(c.nonlinearity_exponent_range.contains(p.nonlinearity_exponent));
            p.radar_pose.validate().unwrap();
        }
    }

    #[test]
    fn uniformity_of_scalar_field() {
        let c = RandomizationConfig {
            segment_weight_range: Interval::new(0.0, 1.0),
            ..RandomizationConfig::default()
        };
        let n = 10_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|seed| sample_plan(&c, seed, &[0]).unwrap().segment_weights[&0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
        // Kolmogorov-Smirnov against U(0,1); alpha = 0.01 critical value.
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn adding_a_segment_leaves_other_fields_alone() {
        let c = RandomizationConfig::default();
        let a = sample_plan(&c, 5, &[0, 1]).unwrap();
        let b = sample_plan(&c, 5, &[0, 1, 7]).unwrap();
        assert_eq!(a.segment_weights[&0], b.segment_weights[&0]);
        assert_eq!(a.segment_weights[&1], b.segment_weights[&1]);
        assert_eq!(a.radar_pose, b.radar_pose);
        assert_eq!(a.static_scatterers, b.static_scatterers);
    }

    #[test]
    fn plan_errors() {
        let c = RandomizationConfig::default();
        assert!(matches!(sample_plan(&c, 1, &[]), Err(Error::Empty(_))));
        let mut bad = c.clone();
        bad.view_distance_range_m = Interval::new(3.0, 1.0);
        assert!(sample_plan(&bad, 1, &[0]).is_err());
        let p = sample_plan(&c, 1, &[0]).unwrap();
        assert!(matches!(segment_weight(&p, 9), Err(Error::UnknownSegment(9))));
    }

    #[test]
    fn unit_weight_interval() {
        let c = RandomizationConfig {
            segment_weight_range: Interval::point(1.0),
            ..RandomizationConfig::default()
        };
        let p = sample_plan(&c, 77, &[0, 1, 2]).unwrap();
        assert!(p.segment_weights.values().all(|&w| w == 1.0));
    }

    #[test]
    fn nonlinearity_examples() {
        let m = 8.0;
        let s = spectro(vec![0.0, 0.25 * m, m, 0.5 * m], 2);
        assert_eq!(apply_nonlinearity(&s, 1.0).unwrap(), s);
        let sq = apply_nonlinearity(&s, 2.0).unwrap();
        assert_eq!(sq.values, vec![0.0, 0.0625 * m, m, 0.25 * m]);
        let zero = spectro(vec![0.0; 4], 2);
        assert_eq!(apply_nonlinearity(&zero, 0.7).unwrap(), zero);
        assert!(apply_nonlinearity(&s, 0.0).is_err());
        let mut db = s.clone();
        db.is_db = true;
        assert!(matches!(apply_nonlinearity(&db, 2.0), Err(Error::ExpectedLinear)));
    }

    proptest::proptest! {
        #[test]
        fn nonlinearity_is_monotone(values in proptest::collection::vec(0.0f64..10.0, 4..40), gamma in 0.3f64..3.0) {
            let w = 2;
            let n = values.len() / w * w;
            let s = spectro(values[..n].to_vec(), w);
            let out = apply_nonlinearity(&s, gamma).unwrap();
            let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            proptest::prop_assert_eq!(argmax(&s.values), argmax(&out.values));
            let max = s.values.iter().copied().fold(0.0, f64::max);
            proptest::prop_assert_eq!(out.values.iter().copied().fold(0.0, f64::max), max);
            for i in 0..n {
                for j in 0..n {
                    if s.values[i] < s.values[j] {
                        proptest::prop_assert!(out.values[i] <= out.values[j]);
                    }
                }
            }
        }
    }
}
