//! Factor ablation: each toggle controls exactly its own plan fields.

use mmforge_core::domain_randomization::{sample_plan, Factor, FactorToggles, RandomizationConfig, RandomizationPlan};
use mmforge_core::radar_model::RadarPose;

const SEGMENTS: [u32; 4] = [0, 1, 2, 5];

fn plan(toggles: FactorToggles, seed: u64) -> RandomizationPlan {
    sample_plan(&RandomizationConfig::default().with_toggles(toggles), seed, &SEGMENTS).unwrap()
}

/// Names of the factors whose fields differ between two plans.
fn differing(a: &RandomizationPlan, b: &RandomizationPlan) -> Vec<Factor> {
    let mut out = Vec::new();
    if a.radar_pose != b.radar_pose || a.view != b.view {
        out.push(Factor::View);
    }
    if a.segment_weights != b.segment_weights {
        out.push(Factor::Segments);
    }
    if a.antenna != b.antenna {
        out.push(Factor::Antenna);
    }
    if a.noise_std != b.noise_std || a.static_scatterers != b.static_scatterers {
        out.push(Factor::Background);
    }
    if a.nonlinearity_exponent != b.nonlinearity_exponent {
        out.push(Factor::Nonlinearity);
    }
    out
}

#[test]
fn all_disabled_is_the_nominal_scene() {
    let c = RandomizationConfig::default();
    let p = plan(FactorToggles::all(false), 17);
    let n = c.nominal;
    let pose = RadarPose::orbit(c.scene_center, n.azimuth_deg, n.elevation_deg, n.distance_m, c.mount).unwrap();
    assert_eq!(p.radar_pose, pose);
    assert!(p.segment_weights.values().all(|&w| w == n.segment_weight));
    assert_eq!(p.antenna.azimuth_beamwidth_deg, n.beamwidth_az_deg);
    assert_eq!(p.antenna.elevation_beamwidth_deg, n.beamwidth_el_deg);
    assert_eq!(p.noise_std, 0.0);
    assert!(p.static_scatterers.is_empty());
    assert_eq!(p.nonlinearity_exponent, n.nonlinearity_exponent);
    // Seed does not matter once everything is off.
    assert_eq!(differing(&p, &plan(FactorToggles::all(false), 18)), vec![]);
}

#[test]
fn single_factor_changes_only_its_fields() {
    for seed in [1u64, 2, 99, 123456] {
        let base = plan(FactorToggles::all(false), seed);
        let full = plan(FactorToggles::all(true), seed);
        for f in Factor::ALL {
            let one = plan(FactorToggles::only(f), seed);
            assert_eq!(differing(&base, &one), vec![f], "seed {seed}, {f:?}");
            // The enabled factor draws the same values as in the full plan.
            assert!(!differing(&full, &one).contains(&f), "seed {seed}, {f:?}");
        }
    }
}

#[test]
fn disabling_one_factor_keeps_the_rest() {
    let seed = 4242;
    let full = plan(FactorToggles::all(true), seed);
    for f in Factor::ALL {
        let mut t = FactorToggles::all(true);
        match f {
            Factor::View => t.view = false,
            Factor::Segments => t.segments = false,
            Factor::Antenna => t.antenna = false,
            Factor::Background => t.background = false,
            Factor::Nonlinearity => t.nonlinearity = false,
        }
        assert_eq!(differing(&full, &plan(t, seed)), vec![f], "{f:?}");
    }
}

#[test]
fn plan_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(FactorToggles::all(true), 7);
    let path = dir.path().join("plan.json");
    p.save(&path).unwrap();
    assert_eq!(RandomizationPlan::load(&path).unwrap(), p);
}
