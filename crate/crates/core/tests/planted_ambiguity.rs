use longtrack::consensus::{self, ErasureConfig};
use longtrack::synth::TwoBlob;
use longtrack::tracker::Localizer;
use longtrack::{iou, DcfTracker, TrackState, TrackerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn erasing_the_look_alike_moves_the_votes() {
    let cfg = TrackerConfig { scale_steps: vec![1.0], ..TrackerConfig::default() };
    for seed in [0, 1] {
        let scene = TwoBlob::new(seed);
        let mut t = DcfTracker::new(cfg.clone());
        t.init(&scene.init, scene.target, &[]).unwrap();
        let home = scene.target.center();
        let (_, frame) = scene.tie(&t, cfg.search_scale).expect("gain bracket");
        let base = t.localize(&frame, home, cfg.search_scale);
        assert!(base.bbox.center().distance(&home) < 4.0);
        let prior = t.classify(&base.response);
        assert_ne!(prior, TrackState::NotFound);

        let erasure = ErasureConfig::default();
        let r = consensus::evaluate(&frame, &base, prior, &t, home, cfg.search_scale, &erasure, &mut ChaCha8Rng::seed_from_u64(seed));
        let moved = r.votes.iter().filter(|(b, _)| iou(b, &scene.moved_target()) > 0.5).count();
        assert!(2 * moved >= r.votes.len(), "seed {seed}: {moved} of {} votes moved", r.votes.len());
        assert!(r.agreement < erasure.agree_min);
        assert_ne!(r.corrected_state, prior);
    }
}

#[test]
fn scene_is_deterministic() {
    let a = TwoBlob::new(4);
    let b = TwoBlob::new(4);
    assert_eq!(a.init.image, b.init.image);
    assert_eq!(a.frame(1.5).image, b.frame(1.5).image);
    assert_ne!(a.init.image, TwoBlob::new(5).init.image);
}
