//! Legacy ASCII VTK export (structured points). DIMENSIONS always carries the
//! grid's point dims; whether samples attach to cells or points is conveyed
//! by CELL_DATA versus POINT_DATA, matching how VTK readers size the arrays.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::model::{VolumeField, VolumeKind};

const VALUES_PER_LINE: usize = 9;

/// Writes `field` as a "# vtk DataFile Version 3.0" structured-points file.
pub fn export_vtk_legacy(field: &VolumeField, path: &Path) -> Result<()> {
    let spec = &field.spec;
    let mut out = Vec::with_capacity(field.values.len() * 16 + 256);
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "level-crossing probability volume").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET STRUCTURED_POINTS").unwrap();
    writeln!(
        out,
        "DIMENSIONS {} {} {}",
        spec.dims[0], spec.dims[1], spec.dims[2]
    )
    .unwrap();
    writeln!(
        out,
        "ORIGIN {} {} {}",
        spec.origin[0], spec.origin[1], spec.origin[2]
    )
    .unwrap();
    writeln!(
        out,
        "SPACING {} {} {}",
        spec.spacing[0], spec.spacing[1], spec.spacing[2]
    )
    .unwrap();
    let attach = match field.kind {
        VolumeKind::CellCentered => "CELL_DATA",
        VolumeKind::PointCentered => "POINT_DATA",
    };
    writeln!(out, "{attach} {}", field.values.len()).unwrap();
    writeln!(out, "SCALARS values double 1").unwrap();
    writeln!(out, "LOOKUP_TABLE default").unwrap();
    for chunk in field.values.chunks(VALUES_PER_LINE) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GridSpec;
    use tempfile::tempdir;

    #[test]
    fn cell_field_reports_point_dims_and_cell_data() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("field.vtk");
        let spec = GridSpec::new([4, 4, 4], [0.0; 3], [0.5; 3]);
        let values = (0..27).map(|i| i as f64 / 27.0).collect();
        let field = VolumeField::new(spec, VolumeKind::CellCentered, values).unwrap();
        export_vtk_legacy(&field, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET STRUCTURED_POINTS");
        assert!(lines.contains(&"DIMENSIONS 4 4 4"));
        assert!(lines.contains(&"CELL_DATA 27"));
        assert!(lines.contains(&"SCALARS values double 1"));
        let first_value_line = lines[lines.len() - 3];
        assert_eq!(first_value_line.split_whitespace().count(), 9);
    }

    #[test]
    fn point_field_uses_point_data_with_matching_count() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("field.vtk");
        let spec = GridSpec::new([3, 2, 2], [1.0, 2.0, 3.0], [1.0; 3]);
        let field = VolumeField::new(spec, VolumeKind::PointCentered, vec![0.25; 12]).unwrap();
        export_vtk_legacy(&field, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("DIMENSIONS 3 2 2"));
        assert!(text.contains("POINT_DATA 12"));
        assert!(text.contains("ORIGIN 1 2 3"));
    }
}
