//! File formats: JSON model files, raw volume files with JSON sidecars, and
//! legacy VTK export for external renderers. Readers reject malformed input
//! rather than repairing it, naming the offending field.

mod model_file;
mod volume_file;
mod vtk;

pub use model_file::{read_model, write_model};
pub use volume_file::{read_volume, write_volume, RawDtype};
pub use vtk::export_vtk_legacy;
