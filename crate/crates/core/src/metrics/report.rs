use std::fmt::Write;

use super::bootstrap::ConfidenceInterval;
use super::evaluate::EvalReport;
use super::matching::OverlapKind;

fn cell(point: Option<f64>, ci: Option<&ConfidenceInterval>) -> String {
    match (point, ci) {
        (None, _) => "-".to_string(),
        (Some(v), None) => format!("{v:.2}"),
        (Some(v), Some(ci)) => format!("{v:.2} ({:.2}, {:.2})", ci.lo, ci.hi),
    }
}

/// Human-readable tables: overall metrics, then the size breakdown.
pub fn format_eval_table(r: &EvalReport) -> String {
    let ci = |k: &str| r.confidence_intervals.get(k);
    let mut out = String::new();
    let seg = r.kind == OverlapKind::Mask;

    let mut header = vec!["mAP@50", "mAP@50-95", "Recall", "Precision", "F1"];
    let mut row = vec![
        cell(Some(r.map50), ci("map50")),
        cell(Some(r.map50_95), ci("map50_95")),
        cell(Some(r.operating_point.recall), ci("recall")),
        cell(Some(r.operating_point.precision), ci("precision")),
        cell(Some(r.operating_point.f1), ci("f1")),
    ];
    if seg {
        header.splice(0..0, ["DSC", "IoU"]);
        row.splice(0..0, [cell(r.dice_median, ci("dice")), cell(r.iou_median, ci("iou"))]);
    }
    write_table(&mut out, &header, &[row]);

    let _ = writeln!(
        out,
        "\nimages {}  ground truth {}  detections {}  operating threshold {}",
        r.num_images,
        r.num_ground_truth,
        r.num_detections,
        r.operating_point
            .score_threshold
            .map_or("-".to_string(), |t| format!("{t:.3}"))
    );
    let _ = writeln!(
        out,
        "size thresholds (px²): S <= {:.1} < M <= {:.1} < L\n",
        r.size_buckets.t_low, r.size_buckets.t_high
    );

    let mut header = Vec::new();
    let mut row = Vec::new();
    for s in &r.by_size {
        let b = format!("{:?}", s.bucket);
        if seg {
            header.push(format!("DSC-{b}"));
            row.push(cell(s.dice_median, ci(&format!("dice_{b}"))));
            header.push(format!("IoU-{b}"));
            row.push(cell(s.iou_median, ci(&format!("iou_{b}"))));
        }
        header.push(format!("mAP@50-95-{b}"));
        row.push(cell(s.map50_95, ci(&format!("map50_95_{b}"))));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&mut out, &header, &[row]);
    out
}

pub(crate) fn write_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!(" {c:^w$} "))
            .collect();
        format!("|{}|\n", padded.join("|"))
    };
    out.push_str(&line(header.to_vec()));
    let sep: Vec<String> = widths.iter().map(|w| "-".repeat(w + 2)).collect();
    let _ = writeln!(out, "|{}|", sep.join("|"));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
}
