use std::collections::VecDeque;

use hitl_core::command::{CommandKind, DeviceSource, MenuCommand};
use hitl_core::metrics::{summarize, DeviceColumn, ElectrodeSite, ObjectClass, TrialRecord};
use hitl_core::par::Execution;
use hitl_core::pipeline::{ButtonSet, EngineRequest, Pipeline, PipelineState};
use hitl_core::signal::{
    classify_level, emit_actions, power_envelope, CalibrationConfig, CursorAction, EmgFrame,
    SignalLevel,
};
use hitl_core::sim::grasp::{plan_block_grasps, plan_cylinder_grasps};
use hitl_core::sim::reach::check_reachability;
use hitl_core::sim::{ObjectId, Pose, Scene, SceneObject, Shape, SimConfig, Simulation, Zone};
use proptest::prelude::*;

fn level() -> impl Strategy<Value = SignalLevel> {
    prop_oneof![Just(SignalLevel::Rest), Just(SignalLevel::Medium), Just(SignalLevel::High)]
}

fn block(side: f64, x: f64, y: f64, yaw: f64) -> SceneObject {
    SceneObject {
        id: ObjectId(1),
        label: "block".into(),
        shape: Shape::Block { side },
        pose: Pose::new(x, y, yaw),
        zone: Zone::PickArea,
    }
}

/// Runs commands through a pipeline wired to a fast simulation, checking
/// every transition against the graph.
fn drive(kinds: &[bool], seed: u64) -> Pipeline {
    let cfg = SimConfig {
        phase_durations: [0.2; 4],
        recognition_duration: 0.1,
        phase_failure: [0.1; 4],
        ..SimConfig::default()
    }
    .with_seed(seed);
    let mut sim = Simulation::new(cfg, Scene::default_tabletop()).unwrap();
    let mut p = Pipeline::new();
    let mut queue: VecDeque<EngineRequest> = p.start().into();
    let settle = |p: &mut Pipeline, sim: &mut Simulation, queue: &mut VecDeque<EngineRequest>| {
        while let Some(req) = queue.pop_front() {
            for ev in sim.handle(&req).unwrap() {
                queue.extend(p.on_engine_event(&ev).unwrap());
            }
        }
    };
    for (i, select) in kinds.iter().enumerate() {
        settle(&mut p, &mut sim, &mut queue);
        let kind = if *select { CommandKind::Select } else { CommandKind::Cycle };
        let out = p.apply(&MenuCommand::new(i as f64 * 0.05, kind, DeviceSource::Direct));
        assert!(out.from == out.to || out.from.can_transition(out.to), "{:?}", out);
        if out.requests.iter().any(EngineRequest::is_arm_motion) {
            assert_eq!(out.to, PipelineState::GraspExecution);
        }
        queue.extend(out.requests);
        settle(&mut p, &mut sim, &mut queue);
        for ev in sim.step(0.05) {
            let before = p.state();
            queue.extend(p.on_engine_event(&ev).unwrap());
            assert!(before == p.state() || before.can_transition(p.state()));
        }
    }
    p
}

proptest! {
    #[test]
    fn classify_is_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0, prev in level(), h in 0.0f64..0.9) {
        let cfg = CalibrationConfig { hysteresis_ratio: h, ..CalibrationConfig::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(classify_level(lo, prev, &cfg) <= classify_level(hi, prev, &cfg));
    }

    #[test]
    fn actions_need_matching_levels(levels in prop::collection::vec(level(), 1..400)) {
        let cfg = CalibrationConfig::default();
        let stream: Vec<(f64, SignalLevel)> =
            levels.iter().enumerate().map(|(i, l)| (i as f64 * 0.01, *l)).collect();
        let actions = emit_actions(&stream, &cfg).unwrap();
        prop_assert_eq!(&actions, &emit_actions(&stream, &cfg).unwrap());

        let highs = levels.contains(&SignalLevel::High);
        prop_assert!(highs || actions.iter().all(|a| a.action != CursorAction::Select));
        let starts = std::iter::once(SignalLevel::Rest)
            .chain(levels.iter().copied())
            .zip(levels.iter())
            .filter(|(a, b)| *a == SignalLevel::Rest && **b != SignalLevel::Rest)
            .count();
        prop_assert!(actions.len() <= starts);
    }

    #[test]
    fn envelope_modes_agree(vals in prop::collection::vec(-1.0f64..1.0, 1..300)) {
        let frames: Vec<_> =
            vals.iter().enumerate().map(|(i, v)| EmgFrame::new(i as f64 * 0.004, *v)).collect();
        let seq = power_envelope(&frames, 0.2, Execution::Sequential);
        let par = power_envelope(&frames, 0.2, Execution::Parallel);
        prop_assert_eq!(seq, par);
    }

    #[test]
    fn block_geometry(side in 20.0f64..100.0, x in -300.0f64..300.0, y in -300.0f64..300.0,
                      yaw in -3.2f64..3.2) {
        for g in plan_block_grasps(&block(side, x, y, yaw)) {
            prop_assert_eq!(g.approach, nalgebra::Vector3::new(0.0, 0.0, -1.0));
            prop_assert!(((g.contacts[0] - g.contacts[1]).norm() - side).abs() < 1e-9);
            prop_assert_eq!(g.aperture, side);
        }
    }

    #[test]
    fn cylinder_contacts_span_diameter(radius in 10.0f64..80.0, n in 1usize..12) {
        let obj = SceneObject {
            id: ObjectId(4),
            label: "ycb".into(),
            shape: Shape::Cylinder { radius, height: 170.0 },
            pose: Pose::new(0.0, 0.0, 0.3),
            zone: Zone::PickArea,
        };
        let grasps = plan_cylinder_grasps(&obj, n);
        prop_assert_eq!(grasps.len(), n);
        for g in grasps {
            prop_assert!(((g.contacts[0] - g.contacts[1]).norm() - 2.0 * radius).abs() < 1e-9);
        }
    }

    #[test]
    fn reachability_monotone_in_aperture(side in 20.0f64..160.0, small in 10.0f64..150.0,
                                         extra in 0.0f64..100.0, x in -450.0f64..450.0) {
        let scene = Scene::default_tabletop();
        let obj = block(side, x, 100.0, 0.4);
        for g in plan_block_grasps(&obj) {
            let narrow = SimConfig { max_aperture: small, ..SimConfig::ideal() };
            let wide = SimConfig { max_aperture: small + extra, ..SimConfig::ideal() };
            let a = check_reachability(&g, &narrow, &scene.objects);
            let b = check_reachability(&g, &wide, &scene.objects);
            prop_assert!(!(a == hitl_core::sim::Reachability::Reachable
                && b == hitl_core::sim::Reachability::Unreachable));
        }
    }

    #[test]
    fn pipeline_stays_in_graph(kinds in prop::collection::vec(any::<bool>(), 1..600), seed in 0u64..1000) {
        let a = drive(&kinds, seed);
        prop_assert_eq!(a.snapshot(), drive(&kinds, seed).snapshot());
    }

    #[test]
    fn dropping_a_failure_never_lowers_rates(outcomes in prop::collection::vec((0usize..5, 0usize..4, any::<bool>()), 1..80)) {
        let devices = [DeviceSource::Mouse, DeviceSource::Voice, DeviceSource::Switch, DeviceSource::Semg, DeviceSource::Semg];
        let recs: Vec<TrialRecord> = outcomes.iter().map(|(d, o, s)| TrialRecord {
            device: devices[*d],
            site: if *d == 4 { ElectrodeSite::Ear } else { ElectrodeSite::Forearm },
            object: ObjectClass::ALL[*o],
            user_time: *o as f64 * 1.1,
            robot_time: 55.0,
            success: *s,
        }).collect();
        let full = summarize(&recs).unwrap();
        let mut shuffled = recs.clone();
        shuffled.rotate_left(recs.len() / 2);
        prop_assert_eq!(&full, &summarize(&shuffled).unwrap());

        if let Some(i) = recs.iter().position(|r| !r.success) {
            let mut fewer = recs.clone();
            fewer.remove(i);
            if let Ok(less) = summarize(&fewer) {
                for d in DeviceColumn::ALL {
                    for o in ObjectClass::ALL {
                        if let (Some(a), Some(b)) = (full.success_pct(d, o), less.success_pct(d, o)) {
                            prop_assert!(b >= a);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn cycling_len_times_restores_highlight() {
    for state in PipelineState::ALL {
        for start in 0..3 {
            let mut set = ButtonSet::for_state(state, start);
            let before = set.highlight;
            for _ in 0..set.len() {
                set.cycle();
            }
            assert_eq!(set.highlight, before, "{state}");
        }
    }
}
