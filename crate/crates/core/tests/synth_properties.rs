mod common;

use std::f64::consts::PI;

use viewport_core::synth::{generate_cohort, group_dispersion, CohortSpec, ScenarioScript};

use common::haversine_spherical;

#[test]
fn without_cues_groups_are_indistinguishable() {
    let ratios: Vec<f64> = (0..5)
        .map(|seed| {
            let script = ScenarioScript {
                seed,
                auto_cues: false,
                ..ScenarioScript::default()
            };
            assert!(script.cues.is_empty());
            let cohort = generate_cohort(&CohortSpec::nine_by_nine(script), "v01").unwrap();
            let (g, u) = group_dispersion(&cohort);
            g / u
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((0.8..=1.25).contains(&mean), "{ratios:?}");
}

#[test]
fn guided_viewers_cluster_on_long_cues() {
    let mut checked = 0;
    let (mut guided_total, mut unguided_total) = (0.0, 0.0);
    for seed in 0..5 {
        let script = ScenarioScript::default_for_seed(seed);
        let cohort = generate_cohort(&CohortSpec::nine_by_nine(script.clone()), "v01").unwrap();
        for cue in &script.cues {
            let Some(target) = cue.target() else { continue };
            if script.kappa * (cue.end - cue.start) < 3.0 {
                continue;
            }
            // last sample still inside the cue
            let step = ((cue.end / script.dt).ceil() as usize).saturating_sub(1);
            let mean_distance = |guided: bool| {
                let group = cohort.group(guided);
                group
                    .iter()
                    .map(|t| {
                        let c = t.samples()[step].coord;
                        haversine_spherical(c.phi(), c.theta(), target.phi(), target.theta())
                    })
                    .sum::<f64>()
                    / group.len() as f64
            };
            let g = mean_distance(true);
            assert!(g < script.eta * 3.0 + 0.1, "seed {seed}, cue {:?}: {g}", cue.text);
            guided_total += g;
            unguided_total += mean_distance(false);
            checked += 1;
        }
    }
    assert!(checked >= 10, "only {checked} long cues");
    assert!(unguided_total / checked as f64 > 0.5, "{}", unguided_total / checked as f64);
    assert!(unguided_total > 3.0 * guided_total);
}

#[test]
fn samples_stay_on_domain_and_grid() {
    for seed in 0..3 {
        let script = ScenarioScript::default_for_seed(seed);
        let cohort = generate_cohort(&CohortSpec::nine_by_nine(script.clone()), "v01").unwrap();
        for t in &cohort.trajectories {
            assert_eq!(t.samples().len(), script.steps());
            for (i, s) in t.samples().iter().enumerate() {
                assert_eq!(s.t, i as f64 * script.dt);
                assert!((0.0..2.0 * PI).contains(&s.coord.phi()));
                assert!((0.0..=PI).contains(&s.coord.theta()));
            }
        }
    }
}
