//! Product Epanechnikov kernel.
//!
//! `K(z) = prod_i 0.75 (1 - z_i^2) 1{|z_i| <= 1}` with scaled form
//! `K_h(z) = h^{-d} K(z / h)`. The kernel is symmetric, has unit mass and
//! vanishing first moments, so it is a second-order kernel.

use crate::error::{Error, Result};

const EPANECHNIKOV_PEAK: f64 = 0.75;
const EPANECHNIKOV_L2: f64 = 0.6;

/// Constants of the product Epanechnikov kernel in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    dim: usize,
}

/// `R(K)`, `mu_inf(K)` and the support radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    pub l2_norm_sq: f64,
    pub sup_norm: f64,
    pub support_radius: f64,
}

impl KernelSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("kernel dimension must be positive"));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> KernelConstants {
        let d = self.dim as i32;
        KernelConstants {
            l2_norm_sq: EPANECHNIKOV_L2.powi(d),
            sup_norm: EPANECHNIKOV_PEAK.powi(d),
            support_radius: 1.0,
        }
    }

    /// `K(z)`.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(product_kernel(z.iter().copied()))
    }

    /// `K_h(z) = h^{-d} K(z/h)`.
    pub fn eval_scaled(&self, z: &[f64], h: f64) -> Result<f64> {
        self.check_dim(z)?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
        }
        let inv = 1.0 / h;
        Ok(product_kernel(z.iter().map(|&zi| zi * inv)) * inv.powi(self.dim as i32))
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::invalid(format!(
                "kernel argument has dimension {}, expected {}",
                z.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// One-dimensional Epanechnikov factor.
#[inline]
pub(crate) fn epanechnikov(u: f64) -> f64 {
    let v = 1.0 - u * u;
    if v > 0.0 {
        EPANECHNIKOV_PEAK * v
    } else {
        0.0
    }
}

#[inline]
fn product_kernel(z: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 1.0;
    for zi in z {
        acc *= epanechnikov(zi);
        if acc == 0.0 {
            break;
        }
    }
    acc
}

/// `K_h(a - b)` for equal-length points, without dimension checks.
#[inline]
pub(crate) fn scaled_kernel_between(a: &[f64], b: &[f64], inv_h: f64, norm: f64) -> f64 {
    let mut acc = norm;
    for (ai, bi) in a.iter().zip(b) {
        acc *= epanechnikov((ai - bi) * inv_h);
        if acc == 0.0 {
            return 0.0;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    #[test]
    fn origin_and_boundary_values() {
        let k1 = KernelSpec::new(1).unwrap();
        let k2 = KernelSpec::new(2).unwrap();
        assert_eq!(k1.eval(&[0.0]).unwrap(), 0.75);
        assert_eq!(k1.eval(&[1.0]).unwrap(), 0.0);
        assert_eq!(k1.eval(&[-1.5]).unwrap(), 0.0);
        assert_eq!(k2.eval(&[0.0, 0.0]).unwrap(), 0.5625);
    }

    #[test]
    fn scaled_values() {
        let k1 = KernelSpec::new(1).unwrap();
        let k2 = KernelSpec::new(2).unwrap();
        assert!((k1.eval_scaled(&[0.0], 0.5).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(k1.eval_scaled(&[0.6], 0.5).unwrap(), 0.0);
        assert!((k2.eval_scaled(&[0.0, 0.0], 2.0).unwrap() - 0.140625).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let k1 = KernelSpec::new(1).unwrap();
        assert!(k1.eval(&[0.0, 0.0]).is_err());
        assert!(k1.eval_scaled(&[0.0], 0.0).is_err());
        assert!(k1.eval_scaled(&[0.0], -1.0).is_err());
        assert!(KernelSpec::new(0).is_err());
    }

    #[test]
    fn constants_match_closed_form() {
        let c1 = KernelSpec::new(1).unwrap().constants();
        assert!((c1.l2_norm_sq - 0.6).abs() < 1e-15);
        assert_eq!(c1.sup_norm, 0.75);
        assert_eq!(c1.support_radius, 1.0);
        let c2 = KernelSpec::new(2).unwrap().constants();
        assert!((c2.l2_norm_sq - 0.36).abs() < 1e-15);
    }

    // Gauss-Legendre integrates the degree-4 polynomials on [-1, 1] exactly,
    // which is an independent check of R(K) and the unit mass.
    #[test]
    fn unit_mass_and_l2_by_quadrature() {
        let gl = GaussLegendre::new(8);
        let k1 = KernelSpec::new(1).unwrap();
        let mass = gl.integrate(-1.0, 1.0, |z| k1.eval(&[z]).unwrap());
        let l2 = gl.integrate(-1.0, 1.0, |z| k1.eval(&[z]).unwrap().powi(2));
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((l2 - 0.6).abs() < 1e-12);

        let k2 = KernelSpec::new(2).unwrap();
        let mass2 = gl.integrate(-1.0, 1.0, |a| gl.integrate(-1.0, 1.0, |b| k2.eval(&[a, b]).unwrap()));
        assert!((mass2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_kernel_keeps_unit_mass() {
        let gl = GaussLegendre::new(8);
        let k1 = KernelSpec::new(1).unwrap();
        for h in [0.1, 1.2] {
            let mass = gl.integrate(-h, h, |z| k1.eval_scaled(&[z], h).unwrap());
            assert!((mass - 1.0).abs() < 1e-10, "h={h} mass={mass}");
        }
    }

    #[test]
    fn symmetric_nonnegative_compact_on_dense_grid() {
        let k2 = KernelSpec::new(2).unwrap();
        for i in -60..=60 {
            for j in -60..=60 {
                let z = [i as f64 / 40.0, j as f64 / 40.0];
                let v = k2.eval(&z).unwrap();
                assert!(v >= 0.0);
                assert_eq!(v, k2.eval(&[-z[0], -z[1]]).unwrap());
                if z[0].abs() > 1.0 || z[1].abs() > 1.0 {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn fast_path_agrees_with_checked_eval() {
        let k2 = KernelSpec::new(2).unwrap();
        let h: f64 = 0.37;
        let a = [0.1, -0.2];
        let b = [0.25, 0.05];
        let fast = scaled_kernel_between(&a, &b, 1.0 / h, h.powi(-2));
        let slow = k2.eval_scaled(&[a[0] - b[0], a[1] - b[1]], h).unwrap();
        assert!((fast - slow).abs() < 1e-14);
    }
}
