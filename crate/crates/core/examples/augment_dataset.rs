//! Expands a training split tenfold with seeded random flips, rotations,
//! shears, crops and photometric jitter, keeping labels consistent.

use sonodet::datakit::layout::materialize_split;
use sonodet::datakit::synthetic::{write_synthetic_dataset, SyntheticDataset};
use sonodet::datakit::{augment_dataset, scan_flat, split_by_subject, AugmentSpec, SplitRatios, SubjectRule};

fn main() -> sonodet::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let flat = dir.path().join("flat");
    let spec = SyntheticDataset {
        subjects: 8,
        images_per_subject: (2, 4),
        width: 96,
        height: 80,
        seed: 4,
    };
    write_synthetic_dataset(&flat, &spec)?;
    let entries = scan_flat(&flat.join("images"), &flat.join("labels"), &SubjectRule::default())?;
    let records: Vec<_> = entries.iter().map(|e| e.record.clone()).collect();
    let plan = split_by_subject(&records, SplitRatios::default(), 0)?;
    let placed = materialize_split(&entries, &plan, &dir.path().join("split"))?;

    let aug = AugmentSpec {
        seed: 99,
        ..AugmentSpec::default()
    };
    let manifest = augment_dataset(&placed, &aug, &dir.path().join("augmented"))?;
    println!("{} training images -> {} variants", plan.image_counts(&records)[0], manifest.len());
    for m in manifest.iter().take(5) {
        let ops: Vec<String> = m.chain.iter().map(|t| format!("{t:?}")).collect();
        println!("{} #{}: {} -> {} instances via [{}]", m.image_id, m.variant, m.instances_in, m.instances_out, ops.join(", "));
    }
    Ok(())
}
