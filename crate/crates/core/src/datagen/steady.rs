//! Closed-form steady displacement-magnitude fields on node-centered grids.
//!
//! These stand in for nonlinear solid-mechanics solves: smooth in space,
//! linear in the two parameters, with the parameter pattern applied at the
//! boundary the way the originating boundary-value problems do (driven top
//! face in 2-D, twisted far face in 3-D with a clamped near face).

use ndarray::Array1;

use crate::datagen::GridSpec;

/// 2-D: displacement (0.05·μ₁·y², 0.05·μ₂·y²); the stored field is its
/// magnitude 0.05·y²·‖μ‖₂. The top row (y = ly) carries 0.05·‖μ‖₂ exactly;
/// the bottom row is pinned at zero.
pub fn displacement_field_2d(grid: &GridSpec, mu: &[f64]) -> Array1<f64> {
    assert_eq!(mu.len(), 2, "two parameters");
    assert!(grid.nz <= 1, "2-D grid");
    let norm = (mu[0] * mu[0] + mu[1] * mu[1]).sqrt();
    let mut out = Array1::zeros(grid.dof());
    for j in 0..grid.ny {
        let y = grid.node_y(j);
        let v = 0.05 * y * y * norm;
        for i in 0..grid.nx {
            out[j * grid.nx + i] = v;
        }
    }
    out
}

/// The two twist basis patterns: a rotation by π/3 about the far-face
/// center, written as displacement components relative to the unrotated
/// point. `g1` depends on (y, z); `g2` on (x, y, z).
pub fn twist_g1(y: f64, z: f64) -> f64 {
    let (s, c) = (std::f64::consts::FRAC_PI_3.sin(), std::f64::consts::FRAC_PI_3.cos());
    (0.5 + (y - 0.5) * c - (z - 0.5) * s - y) / 2.0
}

pub fn twist_g2(x: f64, y: f64, z: f64) -> f64 {
    let (s, c) = (std::f64::consts::FRAC_PI_3.sin(), std::f64::consts::FRAC_PI_3.cos());
    (0.5 + (y - 0.5) * s + (z - 0.5) * c - x) / 2.0
}

/// 3-D: field μ₁·x·g₁(y,z) + μ₂·x·g₂(x,y,z) on the unit cube, zero at the
/// clamped x = 0 face and ramping linearly toward the twisted far face.
pub fn displacement_field_3d(grid: &GridSpec, mu: &[f64]) -> Array1<f64> {
    assert_eq!(mu.len(), 2, "two parameters");
    assert!(grid.nz >= 2, "3-D grid");
    let mut out = Array1::zeros(grid.dof());
    for k in 0..grid.nz {
        let z = grid.node_z(k);
        for j in 0..grid.ny {
            let y = grid.node_y(j);
            for i in 0..grid.nx {
                let x = grid.node_x(i);
                out[(k * grid.ny + j) * grid.nx + i] =
                    mu[0] * x * twist_g1(y, z) + mu[1] * x * twist_g2(x, y, z);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_2d() -> GridSpec {
        GridSpec {
            nx: 9,
            ny: 5,
            nz: 1,
            lx: 2.0,
            ly: 1.0,
            lz: 0.0,
        }
    }

    fn grid_3d() -> GridSpec {
        GridSpec {
            nx: 4,
            ny: 4,
            nz: 4,
            lx: 1.0,
            ly: 1.0,
            lz: 1.0,
        }
    }

    #[test]
    fn zero_parameters_give_zero_fields() {
        assert!(displacement_field_2d(&grid_2d(), &[0.0, 0.0]).iter().all(|&v| v == 0.0));
        assert!(displacement_field_3d(&grid_3d(), &[0.0, 0.0]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn top_boundary_carries_exact_magnitude() {
        let grid = grid_2d();
        let mu = [0.6, -0.8];
        let field = displacement_field_2d(&grid, &mu);
        let expect = 0.05 * 1.0; // ‖(0.6, −0.8)‖ = 1
        for i in 0..grid.nx {
            let top = field[(grid.ny - 1) * grid.nx + i];
            assert!((top - expect).abs() < 1e-15);
        }
        // Bottom row pinned.
        for i in 0..grid.nx {
            assert_eq!(field[i], 0.0);
        }
    }

    #[test]
    fn field_is_quadratic_in_y_and_constant_in_x() {
        let grid = grid_2d();
        let field = displacement_field_2d(&grid, &[1.0, 0.0]);
        for j in 0..grid.ny {
            let y = grid.node_y(j);
            for i in 0..grid.nx {
                assert!((field[j * grid.nx + i] - 0.05 * y * y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn clamped_face_is_zero_and_field_linear_in_mu() {
        let grid = grid_3d();
        let a = displacement_field_3d(&grid, &[0.3, 0.5]);
        // x = 0 face (i = 0) clamps to zero.
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                assert_eq!(a[(k * grid.ny + j) * grid.nx], 0.0);
            }
        }
        // Linearity: f(a·μ) = a·f(μ) and additivity across the two axes.
        let b1 = displacement_field_3d(&grid, &[0.3, 0.0]);
        let b2 = displacement_field_3d(&grid, &[0.0, 0.5]);
        for idx in 0..grid.dof() {
            assert!((a[idx] - (b1[idx] + b2[idx])).abs() < 1e-15);
        }
        let doubled = displacement_field_3d(&grid, &[0.6, 1.0]);
        for idx in 0..grid.dof() {
            assert!((doubled[idx] - 2.0 * a[idx]).abs() < 1e-14);
        }
    }

    #[test]
    fn twist_pattern_hand_values() {
        // g1 at (y=0, z=0): (0.5 − 0.5·cos60° + 0.5·sin60° − 0)/2
        let expect = (0.5 - 0.5 * 0.5 + 0.5 * (3.0f64.sqrt() / 2.0)) / 2.0;
        assert!((twist_g1(0.0, 0.0) - expect).abs() < 1e-15);
        // g2 at the far-face center (x=1, y=0.5, z=0.5): (0.5 − 1)/2 = −0.25.
        assert!((twist_g2(1.0, 0.5, 0.5) + 0.25).abs() < 1e-15);
    }
}
