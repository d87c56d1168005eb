//! Draws detection boxes, score labels and a mask tint onto a copy of a
//! frame and saves it as PNG.

use sonodet::datakit::Frame;
use sonodet::geometry::{BBox, BitMask, Detection};
use sonodet::rtharness::{overlay, synthetic_source, FrameSource, OverlayStyle};

fn main() -> sonodet::Result<()> {
    let mut src = synthetic_source(320, 240, 1, 0.0, 5)?;
    let frame: Frame = src.next_frame()?.expect("one frame");
    let lesion = src.truth()[0];
    let mut d = Detection::new(lesion, 0.87, 0);
    d.mask = Some(BitMask::from_box(&lesion, 320, 240));
    let dets = [d, Detection::new(BBox::new(-20.0, 180.0, 60.0, 260.0), 0.31, 0)];

    let out = overlay(&frame, &dets, &OverlayStyle::default());
    let path = std::env::temp_dir().join("sonodet_overlay.png");
    out.save_png(&path)?;
    println!("wrote {} ({}x{}, input untouched: {})", path.display(), out.width(), out.height(), frame.channels() == 1);
    Ok(())
}
