use nalgebra::{Matrix3, Vector3};

/// Real-space lattice with basis vectors as matrix columns: `a` along x,
/// `b` in the xy plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    basis: Matrix3<f64>,
    inverse: Matrix3<f64>,
}

impl Lattice {
    /// Builds the lattice from `[a, b, c, alpha, beta, gamma]` (Å, degrees).
    pub fn from_params(p: [f64; 6]) -> Self {
        let [a, b, c, al, be, ga] = p;
        let (ca, cb, cg) = (
            al.to_radians().cos(),
            be.to_radians().cos(),
            ga.to_radians().cos(),
        );
        let sg = ga.to_radians().sin();
        let cx = cb;
        let cy = (ca - cb * cg) / sg;
        let cz = (1.0 - cx * cx - cy * cy).max(0.0).sqrt();
        #[rustfmt::skip]
        let basis = Matrix3::new(
            a,   b * cg, c * cx,
            0.0, b * sg, c * cy,
            0.0, 0.0,    c * cz,
        );
        let inverse = basis.try_inverse().unwrap_or_else(Matrix3::zeros);
        Self { basis, inverse }
    }

    pub fn to_abs(&self, frac: [f64; 3]) -> [f64; 3] {
        let v = self.basis * Vector3::from(frac);
        [v.x, v.y, v.z]
    }

    pub fn to_frac(&self, abs: [f64; 3]) -> [f64; 3] {
        let v = self.inverse * Vector3::from(abs);
        [v.x, v.y, v.z]
    }

    /// Basis vector `i` (0 = a, 1 = b, 2 = c) in Å.
    pub fn vector(&self, i: usize) -> [f64; 3] {
        let c = self.basis.column(i);
        [c.x, c.y, c.z]
    }

    pub fn edge_lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.basis.column(i).norm())
    }

    /// Distance between adjacent lattice planes spanned by the other two
    /// basis vectors, per axis.
    pub fn plane_spacings(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| 1.0 / self.inverse.row(i).norm())
    }
}
