mod common;

use std::collections::BTreeSet;

use codesign_core::{critical_path, find_spofs, parse_ir, parse_model, propagate, SystemModel};
use common::{bfs, fixpoint_faulty, oracle_critical_paths, random_dag, singleton_spofs, DagParams};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn names(model: &SystemModel) -> Vec<String> {
    let mut v: Vec<String> = model.nodes().iter().map(|n| n.name.clone()).collect();
    v.sort();
    v
}

fn dag_and_subset() -> impl Strategy<Value = (SystemModel, BTreeSet<String>)> {
    any::<u64>().prop_flat_map(|seed| {
        let model = random_dag(seed, &DagParams::small());
        let all = names(&model);
        let n = all.len();
        (Just(model), subsequence(all, 0..=n).prop_map(|v| v.into_iter().collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn propagation_matches_fixpoint((model, seeds) in dag_and_subset()) {
        let state = propagate(&model, &seeds).unwrap();
        prop_assert_eq!(&state.seeded, &seeds);
        prop_assert!(state.seeded.is_disjoint(&state.derived));
        prop_assert_eq!(state.faulty(), fixpoint_faulty(&model, &seeds));
    }

    #[test]
    fn propagation_is_monotone((model, b) in dag_and_subset(), mask in any::<u64>()) {
        let a: BTreeSet<String> = b.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, n)| n.clone()).collect();
        let fa = propagate(&model, &a).unwrap().faulty();
        let fb = propagate(&model, &b).unwrap().faulty();
        prop_assert!(fa.is_subset(&fb));
    }

    #[test]
    fn propagation_is_closed((model, seeds) in dag_and_subset()) {
        let once = propagate(&model, &seeds).unwrap().faulty();
        let twice = propagate(&model, &once).unwrap();
        prop_assert!(twice.derived.is_empty());
        prop_assert_eq!(twice.faulty(), once);
    }

    #[test]
    fn sources_fail_only_when_seeded((model, seeds) in dag_and_subset()) {
        let state = propagate(&model, &seeds).unwrap();
        for node in model.nodes().iter().filter(|n| model.in_degree(&n.name) == 0) {
            prop_assert_eq!(state.is_faulty(&node.name), seeds.contains(&node.name));
        }
    }

    #[test]
    fn critical_path_matches_enumeration((model, blocked) in dag_and_subset()) {
        let result = critical_path(&model, &blocked).unwrap();
        let got: BTreeSet<Vec<String>> = result.paths.iter().cloned().collect();
        prop_assert_eq!(got.len(), result.paths.len(), "duplicate paths");
        let mut sorted = result.paths.clone();
        sorted.sort();
        prop_assert_eq!(&sorted, &result.paths);
        prop_assert_eq!(&got, &oracle_critical_paths(&model, &blocked));
        let union: BTreeSet<String> = got.iter().flatten().cloned().collect();
        prop_assert_eq!(&result.node_union, &union);
        prop_assert_eq!(&result.excluded_faults, &blocked);
        for path in &result.paths {
            prop_assert!(path.iter().all(|n| !blocked.contains(n)));
            let d = bfs(&model, &path[0], &blocked);
            prop_assert_eq!(d.get(path.last().unwrap()).copied(), Some(path.len() - 1));
        }
    }

    #[test]
    fn spofs_match_singleton_seeding(seed in any::<u64>()) {
        let model = random_dag(seed, &DagParams::small());
        let report = find_spofs(&model).unwrap();
        prop_assert_eq!(&report.spofs, &singleton_spofs(&model));
        let witnessed: BTreeSet<String> = report.witness.keys().cloned().collect();
        prop_assert_eq!(&witnessed, &report.spofs);
        for (node, end) in &report.witness {
            let faulty = fixpoint_faulty(&model, &BTreeSet::from([node.clone()]));
            let first_end = model
                .end_nodes()
                .map(|n| n.name.clone())
                .filter(|e| faulty.contains(e))
                .min();
            prop_assert_eq!(Some(end), first_end.as_ref());
        }
    }
}

#[test]
fn unknown_nodes_are_rejected() {
    let model = parse_model(codesign_core::AUTOMATED_DRIVING_XML).unwrap();
    assert!(propagate(&model, ["Ghost"]).is_err());
    assert!(critical_path(&model, ["Ghost"]).is_err());
}

/// The example system typed out by hand in list form.
const HAND_WRITTEN_IR: &str = "\
Nodes:
    - Camera1
    - Camera2
    - Camera3
    - Radar1
    - Radar2
    - Lidar1
    - GPS
    - IMU
    - VelocitySensor
    - Map
    - ImageProcessor
    - SignalProcessor
    - PointCloudProcessor
    - SensorFusion
    - PathPlanner
    - CollisionAvoidance
    - VehicleController
Edges:
    - Camera1 --> ImageProcessor
    - Camera2 --> ImageProcessor
    - Camera3 --> ImageProcessor
    - Radar1 --> SignalProcessor
    - Radar2 --> SignalProcessor
    - Lidar1 --> PointCloudProcessor
    - IMU --> PointCloudProcessor
    - VelocitySensor --> PointCloudProcessor
    - GPS --> Map
    - ImageProcessor --> SensorFusion
    - SignalProcessor --> SensorFusion
    - PointCloudProcessor --> SensorFusion
    - SensorFusion --> PathPlanner
    - Map --> PathPlanner
    - SensorFusion --> CollisionAvoidance
    - PathPlanner --> VehicleController
    - CollisionAvoidance --> VehicleController
Attributes:
    - Camera1: start = true
    - Camera2: start = true
    - Camera3: start = true
    - Radar1: start = true
    - Radar2: start = true
    - Lidar1: start = true
    - GPS: start = true
    - IMU: start = true
    - VelocitySensor: start = true
    - ImageProcessor: gate = 2OO3(Camera1,Camera2,Camera3)
    - PointCloudProcessor: gate = 2OO3(Lidar1,IMU,VelocitySensor)
    - PathPlanner: gate = OR(SensorFusion,Map)
    - VehicleController: gate = OR(PathPlanner,CollisionAvoidance)
    - VehicleController: end = true
";

#[test]
fn hand_written_ir_agrees_with_xml() {
    let from_ir = parse_ir(HAND_WRITTEN_IR).unwrap();
    let from_xml = parse_model(codesign_core::AUTOMATED_DRIVING_XML).unwrap();
    assert!(from_ir.structure_eq(&from_xml));
    assert_eq!(verbalize_text(&from_xml), HAND_WRITTEN_IR);
    assert_eq!(find_spofs(&from_ir).unwrap(), find_spofs(&from_xml).unwrap());
}

fn verbalize_text(model: &SystemModel) -> String {
    codesign_core::verbalize(model).text
}
