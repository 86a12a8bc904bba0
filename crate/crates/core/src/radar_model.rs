//! FMCW radar configuration, pose, antenna pattern and derived resolutions.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::SPEED_OF_LIGHT;

/// Physical parameters of one FMCW radar channel.
///
/// Chirps are assumed back to back: the chirp repetition interval is
/// `1 / (chirps_per_frame * frame_rate_hz)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub sweep_rate_hz_per_s: f64,
    pub samples_per_chirp: usize,
    pub adc_rate_hz: f64,
    pub chirps_per_frame: usize,
    pub frame_rate_hz: f64,
    #[serde(default = "one")]
    pub tx_power_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for RadarConfig {
    /// 77 GHz carrier, 4 GHz sweep, 256 samples at 5 Msps, 128 chirps, 50 fps.
    fn default() -> Self {
        RadarConfig::new(77e9, 4e9, 256, 5e6, 128, 50.0)
    }
}

impl RadarConfig {
    /// Builds a config with the sweep rate implied by `bandwidth` over the
    /// sampled chirp duration.
    pub fn new(
        carrier_hz: f64,
        bandwidth_hz: f64,
        samples_per_chirp: usize,
        adc_rate_hz: f64,
        chirps_per_frame: usize,
        frame_rate_hz: f64,
    ) -> Self {
        let active = samples_per_chirp as f64 / adc_rate_hz;
        RadarConfig {
            carrier_hz,
            bandwidth_hz,
            sweep_rate_hz_per_s: bandwidth_hz / active,
            samples_per_chirp,
            adc_rate_hz,
            chirps_per_frame,
            frame_rate_hz,
            tx_power_scale: 1.0,
        }
    }

    /// Sampled portion of one chirp, seconds.
    pub fn chirp_active_time(&self) -> f64 {
        self.samples_per_chirp as f64 / self.adc_rate_hz
    }

    /// Chirp repetition interval, seconds.
    pub fn pri(&self) -> f64 {
        1.0 / (self.chirps_per_frame as f64 * self.frame_rate_hz)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Largest delay whose beat frequency stays below the ADC rate.
    pub fn max_delay(&self) -> f64 {
        self.adc_rate_hz / self.sweep_rate_hz_per_s
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("sweep_rate_hz_per_s", self.sweep_rate_hz_per_s),
            ("adc_rate_hz", self.adc_rate_hz),
            ("frame_rate_hz", self.frame_rate_hz),
            ("tx_power_scale", self.tx_power_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.samples_per_chirp == 0 || self.chirps_per_frame == 0 {
            return Err(Error::InvalidConfig(
                "samples_per_chirp and chirps_per_frame must be > 0".into(),
            ));
        }
        let swept = self.sweep_rate_hz_per_s * self.chirp_active_time();
        if ((swept - self.bandwidth_hz) / self.bandwidth_hz).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "sweep rate x chirp time = {swept} Hz does not match bandwidth {} Hz",
                self.bandwidth_hz
            )));
        }
        let duty = self.chirp_active_time() * self.chirps_per_frame as f64 * self.frame_rate_hz;
        if duty > 1.0 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "{} chirps of {} s do not fit in a {} Hz frame",
                self.chirps_per_frame,
                self.chirp_active_time(),
                self.frame_rate_hz
            )));
        }
        Ok(())
    }

    /// Short hex digest of the canonical JSON form, used for provenance.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Quantities that follow from a [`RadarConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub wavelength_m: f64,
    pub range_resolution_m: f64,
    pub prf_hz: f64,
    pub doppler_resolution_hz: f64,
    pub max_unambiguous_speed_m_s: f64,
}

pub fn derive(config: &RadarConfig) -> Result<DerivedParams> {
    config.validate()?;
    let wavelength_m = config.wavelength();
    let prf_hz = config.chirps_per_frame as f64 * config.frame_rate_hz;
    Ok(DerivedParams {
        wavelength_m,
        range_resolution_m: SPEED_OF_LIGHT / (2.0 * config.bandwidth_hz),
        prf_hz,
        doppler_resolution_hz: prf_hz / config.chirps_per_frame as f64,
        max_unambiguous_speed_m_s: wavelength_m * prf_hz / 4.0,
    })
}

/// Radar placement. `boresight` and `up` are orthonormal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPose {
    pub position: Vec3,
    pub boresight: Vec3,
    pub up: Vec3,
}

/// How the board is mounted around its boresight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mount {
    /// Antenna "up" follows world +y.
    #[default]
    Upright,
    /// Rotated onto its side: antenna "up" follows world +x.
    Sideways,
}

impl RadarPose {
    pub fn new(position: Vec3, boresight: Vec3, up: Vec3) -> Result<Self> {
        let pose = RadarPose {
            position,
            boresight,
            up,
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Radar at `position` aimed at `target`, with `up_hint` projected
    /// orthogonal to the boresight.
    pub fn looking_at(position: Vec3, target: Vec3, up_hint: Vec3) -> Result<Self> {
        let boresight = (target - position)
            .normalized()
            .ok_or_else(|| Error::param("target", "coincides with radar position"))?;
        let up = (up_hint - boresight * up_hint.dot(boresight))
            .normalized()
            .or_else(|| {
                let alt = if boresight.x.abs() < 0.9 { Vec3::X } else { Vec3::Z };
                (alt - boresight * alt.dot(boresight)).normalized()
            })
            .ok_or_else(|| Error::param("up_hint", "degenerate"))?;
        RadarPose::new(position, boresight, up)
    }

    /// Pose at azimuth/elevation/distance around `center`, looking at it.
    ///
    /// Azimuth rotates about world +y starting from +z; elevation lifts the
    /// radar above the horizontal plane through `center`.
    pub fn orbit(center: Vec3, azimuth_deg: f64, elevation_deg: f64, distance_m: f64, mount: Mount) -> Result<Self> {
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let offset = Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos()) * distance_m;
        let hint = match mount {
            Mount::Upright => Vec3::Y,
            Mount::Sideways => Vec3::X,
        };
        RadarPose::looking_at(center + offset, center, hint)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: Vec3| (v.norm() - 1.0).abs() <= 1e-9;
        if !unit(self.boresight) || !unit(self.up) {
            return Err(Error::InvalidConfig("boresight and up must be unit vectors".into()));
        }
        if self.boresight.dot(self.up).abs() > 1e-9 {
            return Err(Error::InvalidConfig("boresight and up must be orthogonal".into()));
        }
        if !self.position.is_finite() {
            return Err(Error::InvalidConfig("radar position must be finite".into()));
        }
        Ok(())
    }

    /// Horizontal axis of the antenna frame.
    pub fn right(&self) -> Vec3 {
        self.boresight.cross(self.up)
    }

    /// Azimuth and elevation (radians) of `target` in the antenna frame.
    pub fn angles_to(&self, target: Vec3) -> (f64, f64) {
        let d = target - self.position;
        let x = d.dot(self.right());
        let y = d.dot(self.up);
        let z = d.dot(self.boresight);
        (x.atan2(z), y.atan2(x.hypot(z)))
    }
}

/// Gaussian-beam antenna with -3 dB widths per plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    pub azimuth_beamwidth_deg: f64,
    pub elevation_beamwidth_deg: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern {
            azimuth_beamwidth_deg: 60.0,
            elevation_beamwidth_deg: 60.0,
        }
    }
}

impl AntennaPattern {
    pub fn validate(&self) -> Result<()> {
        for (name, bw) in [
            ("azimuth_beamwidth_deg", self.azimuth_beamwidth_deg),
            ("elevation_beamwidth_deg", self.elevation_beamwidth_deg),
        ] {
            if !(bw > 0.0 && bw <= 180.0) {
                return Err(Error::InvalidConfig(format!("{name} must be in (0, 180], got {bw}")));
            }
        }
        Ok(())
    }

    /// Gain for off-axis angles in radians.
    #[inline]
    pub fn gain_at(&self, azimuth: f64, elevation: f64) -> f64 {
        let a = azimuth / self.azimuth_beamwidth_deg.to_radians();
        let e = elevation / self.elevation_beamwidth_deg.to_radians();
        (-4.0 * LN_2 * (a * a + e * e)).exp()
    }
}

/// One-way antenna gain toward `target`, in `[0, 1]`, 0.5 at half the
/// beamwidth off axis.
pub fn antenna_gain(pattern: &AntennaPattern, pose: &RadarPose, target: Vec3) -> f64 {
    let (az, el) = pose.angles_to(target);
    pattern.gain_at(az, el)
}

/// File form of the radar settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RadarFile {
    #[serde(flatten)]
    pub config: RadarConfig,
    #[serde(default)]
    pub antenna: AntennaPattern,
}

impl RadarFile {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: RadarFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        file.config.validate()?;
        file.antenna.validate()?;
        Ok(file)
    }
}
