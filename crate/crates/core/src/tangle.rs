use crate::model::{GridSpec, VolumeField, VolumeKind};

/// The tangle-cube implicit field.
pub fn tangle_value(x: f64, y: f64, z: f64) -> f64 {
    let q = |v: f64| v * v * v * v - 5.0 * v * v;
    q(x) + q(y) + q(z) + 11.8
}

/// Samples the tangle field on a point-centered grid in index coordinates
/// (origin 0, spacing 1), with indices mapped linearly onto [-2.5, 2.5]^3.
pub fn generate_tangle(dims: [usize; 3]) -> VolumeField {
    let spec = GridSpec::index_coords(dims);
    let mut values = vec![0.0; spec.point_count()];
    for k in 0..dims[2] {
        let z = map_index(k, dims[2]);
        for j in 0..dims[1] {
            let y = map_index(j, dims[1]);
            for i in 0..dims[0] {
                let x = map_index(i, dims[0]);
                values[spec.point_index(i, j, k)] = tangle_value(x, y, z);
            }
        }
    }
    VolumeField { spec, kind: VolumeKind::PointCentered, values }
}

fn map_index(i: usize, dim: usize) -> f64 {
    -2.5 + 5.0 * i as f64 / (dim - 1) as f64
}
