//! Runs the detection engine against a replay fixture: a recorded head
//! tensor stands in for the network, and decoding maps the boxes back onto
//! the source frame.

use sonodet::datakit::Frame;
use sonodet::engine::synth::synthetic_head;
use sonodet::engine::{replay_backend, DecodeConfig, Engine, ReplayEntry, ReplayFixture, ReplayMode, ScaleInfo};
use sonodet::geometry::{BBox, Detection};

fn main() -> sonodet::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let (w, h) = (800, 600);
    let truth = [
        Detection::new(BBox::new(120.0, 200.0, 360.0, 420.0), 0.91, 0),
        Detection::new(BBox::new(125.0, 205.0, 362.0, 418.0), 0.55, 0),
        Detection::new(BBox::new(500.0, 80.0, 640.0, 190.0), 0.47, 0),
    ];
    let head = synthetic_head(&truth, 1, 8400, &ScaleInfo::new(w, h, 640)?)?;
    let path = dir.path().join("head.replay");
    ReplayFixture {
        mode: ReplayMode::Cycle,
        input_shape: vec![1, 3, 640, 640],
        entries: vec![ReplayEntry {
            input_checksum: None,
            outputs: vec![head],
        }],
    }
    .write(&path)?;

    let mut engine = Engine::new(replay_backend(&path)?, DecodeConfig::default())?;
    let (dets, times) = engine.detect_timed(&Frame::filled(w, h, 3, 60))?;
    for d in &dets {
        let b = d.bbox;
        println!("score {:.2}  box ({:.1}, {:.1}, {:.1}, {:.1})", d.score, b.x1, b.y1, b.x2, b.y2);
    }
    println!("{times:?}");
    Ok(())
}
