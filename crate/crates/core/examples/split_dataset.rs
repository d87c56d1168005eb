//! Generates a synthetic flat dataset and splits it 70:10:20 by subject, so
//! no patient appears in two splits.

use sonodet::datakit::layout::materialize_split;
use sonodet::datakit::synthetic::{write_synthetic_dataset, SyntheticDataset};
use sonodet::datakit::{scan_flat, split_by_subject, SplitRatios, SubjectRule};

fn main() -> sonodet::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let flat = dir.path().join("flat");
    let spec = SyntheticDataset {
        subjects: 30,
        images_per_subject: (2, 12),
        width: 64,
        height: 64,
        seed: 1,
    };
    let n = write_synthetic_dataset(&flat, &spec)?;
    let entries = scan_flat(&flat.join("images"), &flat.join("labels"), &SubjectRule::default())?;
    let records: Vec<_> = entries.iter().map(|e| e.record.clone()).collect();
    let plan = split_by_subject(&records, SplitRatios::default(), 7)?;
    materialize_split(&entries, &plan, &dir.path().join("split"))?;

    let images = plan.image_counts(&records);
    let subjects = plan.subject_counts();
    println!("{n} images from {} subjects", spec.subjects);
    for (k, name) in ["train", "valid", "test"].iter().enumerate() {
        println!(
            "{name:>5}: {:>3} images ({:.1}%), {:>2} subjects",
            images[k],
            100.0 * images[k] as f64 / n as f64,
            subjects[k]
        );
    }
    Ok(())
}
