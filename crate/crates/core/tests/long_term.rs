use longtrack::config::Config;
use longtrack::orchestrator::{LongTermTracker, Mode};
use longtrack::redetect;
use longtrack::synth::{Path2, Scene, SceneScript, TargetSpec};
use longtrack::{iou, Frame, TrackState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn script() -> SceneScript {
    let mut s = SceneScript::new("gap", 90, TargetSpec {
        size: (16, 16),
        texture_seed: 3,
        path: Path2::fixed(100.0, 90.0),
    });
    s.seed = 5;
    s.absences = vec![(20, 60)];
    s
}

#[test]
fn loses_and_reacquires_a_hidden_target() {
    let script = script();
    let scene = Scene::new(&script).unwrap();
    let cfg = Config::default();
    let mut t = LongTermTracker::new(cfg.clone()).unwrap();
    let gt0 = scene.ground_truth(0).unwrap();
    let mut results = vec![t.init(&Frame::new(scene.render(0), 0), gt0).unwrap()];
    for i in 1..script.frames {
        results.push(t.step(&Frame::new(scene.render(i), i as u64)).unwrap());
    }
    assert_eq!(results.len(), script.frames);

    for r in &results[..10] {
        assert_eq!((r.state, r.mode, r.confidence), (TrackState::Normal, Mode::Tracking, 1.0));
    }
    let lost_by = 20 + cfg.lost_after;
    assert_eq!(results[lost_by - 1].mode, Mode::Lost);
    for r in &results[lost_by..60] {
        assert_eq!((r.mode, r.confidence), (Mode::Lost, 0.0));
    }

    let grid = redetect::build_grid((script.width, script.height), &gt0, cfg.tracker.search_scale, &mut ChaCha8Rng::seed_from_u64(0));
    let n = redetect::num_searches((script.width, script.height), &gt0, &cfg.redetect);
    let bound = grid.len().div_ceil(n);
    let back = (60..script.frames)
        .find(|&i| results[i].mode == Mode::Tracking)
        .expect("target reacquired");
    assert!(back < 60 + bound, "reacquired at {back}, bound {bound}");
    assert!(results[back].reinitialized);
    let gt = scene.ground_truth(back).unwrap();
    assert!(iou(&results[back].bbox, &gt) > 0.5);
}

#[test]
fn lost_frames_repeat_the_last_confident_box() {
    let script = script();
    let scene = Scene::new(&script).unwrap();
    let mut t = LongTermTracker::new(Config::default()).unwrap();
    t.init(&Frame::new(scene.render(0), 0), scene.ground_truth(0).unwrap()).unwrap();
    let mut lost = Vec::new();
    for i in 1..50 {
        let r = t.step(&Frame::new(scene.render(i), i as u64)).unwrap();
        if r.mode == Mode::Lost {
            lost.push(r.bbox);
        }
    }
    assert!(!lost.is_empty());
    let (last, _) = t.last_confident().unwrap();
    assert!(lost.iter().all(|b| *b == last));
}

#[test]
fn step_before_init_is_an_error() {
    let mut t = LongTermTracker::new(Config::default()).unwrap();
    let scene_script = script();
    let scene = Scene::new(&scene_script).unwrap();
    assert!(t.step(&Frame::new(scene.render(0), 0)).is_err());
}
