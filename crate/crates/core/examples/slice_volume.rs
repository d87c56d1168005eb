//! Writes a small NIfTI volume, reads it back and slices it along the third
//! axis into 8-bit frames.

use sonodet::datakit::{read_nifti, slice_axial, write_nifti, NiftiDatatype, Volume3D};

fn main() -> sonodet::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let (nx, ny, nz) = (64, 48, 12);
    let voxels = (0..nx * ny * nz)
        .map(|i| {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            let r2 = (x as f32 - 32.0).powi(2) + (y as f32 - 24.0).powi(2);
            if r2 < (4.0 + z as f32).powi(2) { 900.0 } else { 100.0 + z as f32 }
        })
        .collect();
    let path = dir.path().join("case_01.nii");
    write_nifti(&path, &Volume3D::new((nx, ny, nz), voxels)?, NiftiDatatype::I16)?;

    let volume = read_nifti(&path)?;
    let frames = slice_axial(&volume);
    for (z, f) in frames.iter().enumerate() {
        f.save_png(&dir.path().join(format!("case-01_{z:03}.png")))?;
    }
    println!("{:?} volume -> {} frames of {}x{}", volume.dims(), frames.len(), frames[0].width(), frames[0].height());
    Ok(())
}
