//! Evaluation grids over the state variable `x`.

use crate::error::{Error, Result};

/// A finite grid of points in dimension 1 or 2 with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

fn trapezoid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi - lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == 0 || i + 1 == n { 0.5 * step } else { step })
        .collect()
}

impl EvalGrid {
    /// `n` equispaced points per axis on `[lo, hi]^dim`, first axis slowest.
    pub fn uniform(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo <= hi) || !(dim == 1 || dim == 2) {
            return Err(Error::invalid("grid needs dim in {1,2}, n >= 1 and lo <= hi"));
        }
        let axis = linspace(lo, hi, n);
        let w = trapezoid(lo, hi, n);
        match dim {
            1 => Ok(Self {
                dim,
                points: axis,
                weights: w,
            }),
            _ => {
                let mut points = Vec::with_capacity(2 * n * n);
                let mut weights = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        points.push(axis[i]);
                        points.push(axis[j]);
                        weights.push(w[i] * w[j]);
                    }
                }
                Ok(Self { dim, points, weights })
            }
        }
    }

    /// Arbitrary points; integration weights are uniform.
    pub fn from_points(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::invalid("grid points must be a nonempty n x d array"));
        }
        let n = points.len() / dim;
        Ok(Self {
            dim,
            points,
            weights: vec![1.0; n],
        })
    }

    /// Default evaluation grid: 200 points on `[-2, 2]` or 21x21 on `[-1.5, 1.5]^2`.
    pub fn default_for_dim(dim: usize) -> Result<Self> {
        match dim {
            1 => Self::uniform(1, -2.0, 2.0, 200),
            2 => Self::uniform(2, -1.5, 1.5, 21),
            _ => Err(Error::invalid("only d in {1, 2} is supported")),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        let g1 = EvalGrid::default_for_dim(1).unwrap();
        assert_eq!(g1.len(), 200);
        assert_eq!(g1.point(0), &[-2.0]);
        assert_eq!(g1.point(199), &[2.0]);
        let g2 = EvalGrid::default_for_dim(2).unwrap();
        assert_eq!(g2.len(), 441);
        assert_eq!(g2.point(440), &[1.5, 1.5]);
        assert!((g2.weights().iter().sum::<f64>() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_weights_integrate_linear_exactly() {
        let g = EvalGrid::uniform(1, -2.0, 2.0, 7).unwrap();
        let s: f64 = g.iter().zip(g.weights()).map(|(x, w)| w * (3.0 * x[0] + 1.0)).sum();
        assert!((s - 4.0).abs() < 1e-12);
    }
}
