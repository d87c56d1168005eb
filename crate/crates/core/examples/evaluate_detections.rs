//! Scores a small detection set against ground truth and prints the report
//! table with bootstrap confidence intervals.

use sonodet::geometry::{BBox, Detection, GroundTruthInstance};
use sonodet::metrics::{evaluate, format_eval_table, ByImage, EvalOptions};

fn main() -> sonodet::Result<()> {
    let mut gts = ByImage::new();
    let mut dets = ByImage::new();
    for k in 0..20 {
        let id = format!("p{:02}_{k:03}", k % 6);
        let subject = id[..3].to_string();
        let truth = BBox::new(40.0 + k as f64, 50.0, 140.0 + 2.0 * k as f64, 130.0);
        gts.insert(id.clone(), vec![GroundTruthInstance::new(&id, &subject, truth)]);
        let mut found = Vec::new();
        if k % 7 != 3 {
            found.push(Detection::new(truth.translate(3.0, -2.0), 0.95 - 0.01 * k as f64, 0));
        }
        if k % 5 == 0 {
            found.push(Detection::new(BBox::new(300.0, 300.0, 340.0, 350.0), 0.4, 0));
        }
        dets.insert(id, found);
    }
    let report = evaluate(&dets, &gts, &EvalOptions::default())?;
    print!("{}", format_eval_table(&report));
    println!("map50 = {:.4}  map50-95 = {:.4}", report.map50, report.map50_95);
    Ok(())
}
