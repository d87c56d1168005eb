//! Dataset preparation: volume slicing, label files, subject-level splits
//! and offline augmentation.

pub mod augment;
mod frame;
pub mod labels;
pub mod layout;
pub mod nifti;
pub mod split;
pub mod synthetic;
pub mod transform;

pub use augment::{augment_dataset, AugmentSpec, ManifestEntry};
pub use frame::{image_dimensions, Frame};
pub use labels::{read_yolo_labels, write_yolo_labels, LabelShape};
pub use layout::{load_ground_truth, scan_flat, scan_layout, DatasetEntry, SubjectRule};
pub use nifti::{read_nifti, slice_axial, write_nifti, NiftiDatatype, Volume3D};
pub use split::{split_by_subject, SplitPlan, SplitRatios};
pub use transform::{transform_geometric, transform_photometric, Geometric, Photometric, Transform};
