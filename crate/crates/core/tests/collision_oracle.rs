use proptest::prelude::*;
use swarmstep_core::collision::{detect, CollisionConfig};
use swarmstep_core::exec::Parallelism;
use swarmstep_core::state::{AgentBatch, AgentTypeId, InitialPose, Vec3, WorldSnapshot};
use swarmstep_testkit::checks::collision_discrepancies;

#[test]
fn grid_matches_all_pairs_sequential() {
    assert_eq!(collision_discrepancies(1, 200, 500, Parallelism::Sequential), 0);
}

#[test]
fn grid_matches_all_pairs_parallel() {
    assert_eq!(collision_discrepancies(2, 200, 500, Parallelism::Parallel), 0);
}

fn two(a: Vec3, b: Vec3) -> WorldSnapshot {
    let batch = AgentBatch::create(AgentTypeId(0), &[InitialPose::at(a), InitialPose::at(b)], 0).unwrap();
    WorldSnapshot { tick: 0, time: 0.0, sections: vec![batch.snapshot(0)] }
}

proptest! {
    #[test]
    fn pair_verdict_matches_distance(
        a in proptest::array::uniform3(-20.0f64..20.0),
        d in proptest::array::uniform3(-1.0f64..1.0),
        cell in 0.3f64..2.0,
    ) {
        let config = CollisionConfig { default_radius: 0.15, r_sense: 1.0, cell, ..Default::default() };
        let (pa, pb) = (Vec3::from_array(a), Vec3::from_array(a) + Vec3::from_array(d));
        let report = detect(&two(pa, pb), &config, Parallelism::Sequential);
        let dist = (pa - pb).norm();
        prop_assert_eq!(report.collisions.len() == 1, dist < 0.3);
        prop_assert_eq!(report.neighbor_sets.len() == 2, dist < 1.0);
    }
}

#[test]
fn cell_boundaries_do_not_change_the_verdict() {
    let config = CollisionConfig::default();
    let r = detect(&two(Vec3::new(0.999, 0.0, 0.0), Vec3::new(1.001, 0.0, 0.0)), &config, Parallelism::Sequential);
    assert_eq!(r.collisions.len(), 1);
    let r = detect(&two(Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)), &config, Parallelism::Sequential);
    assert!(r.collisions.is_empty());
    assert!(r.neighbor_sets.is_empty());
}
