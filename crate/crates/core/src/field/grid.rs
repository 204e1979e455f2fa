use crate::error::{invalid, Error, Result};
use crate::point::Point;
use crate::scalar::Scalar;

/// Equal-volume cells tiling a box in R^1 or R^2, with one skewness value per
/// cell. Stands in for the control measure and skewness intensity of a stable
/// random measure; kernels are evaluated at cell centers.
#[derive(Clone, Debug)]
pub struct DiscreteMeasureGrid<T> {
    lower: Point<T>,
    upper: Point<T>,
    shape: [usize; 2],
    axis_centers: [Vec<T>; 2],
    centers: Vec<Point<T>>,
    volumes: Vec<T>,
    skewness: Vec<T>,
}

impl<T: Scalar> DiscreteMeasureGrid<T> {
    /// Regular grid with `cells[a]` cells along axis `a`. Cell index is
    /// `ix * ny + iy` in two dimensions.
    pub fn regular(lower: Point<T>, upper: Point<T>, cells: &[usize]) -> Result<Self> {
        let dim = lower.dim();
        if upper.dim() != dim || cells.len() != dim {
            return Err(Error::Domain(
                "grid bounds and cell counts must share one dimension".into(),
            ));
        }
        let mut shape = [1usize; 2];
        let mut axis_centers: [Vec<T>; 2] = [Vec::new(), vec![T::zero()]];
        let mut widths = [T::one(); 2];
        for a in 0..dim {
            let (lo, hi) = (lower.coords()[a], upper.coords()[a]);
            if !(hi > lo) {
                return Err(invalid("upper bound", hi.as_f64(), "greater than the lower bound"));
            }
            if cells[a] == 0 {
                return Err(invalid("cells", 0.0, "at least one cell per axis"));
            }
            shape[a] = cells[a];
            let w = (hi - lo) / T::lit(cells[a] as f64);
            widths[a] = w;
            axis_centers[a] = (0..cells[a])
                .map(|i| lo + (T::lit(i as f64) + T::lit(0.5)) * w)
                .collect();
        }
        let volume = widths[0] * if dim == 2 { widths[1] } else { T::one() };
        let mut centers = Vec::with_capacity(shape[0] * shape[1]);
        for &cx in &axis_centers[0] {
            if dim == 1 {
                centers.push(Point::new1(cx));
            } else {
                for &cy in &axis_centers[1] {
                    centers.push(Point::new2(cx, cy));
                }
            }
        }
        let n = centers.len();
        let grid = Self {
            lower,
            upper,
            shape,
            axis_centers,
            centers,
            volumes: vec![volume; n],
            skewness: vec![T::zero(); n],
        };
        grid.check_tiling()?;
        Ok(grid)
    }

    /// Unit interval or unit square with `cells` cells per axis.
    pub fn unit(dim: usize, cells: usize) -> Result<Self> {
        match dim {
            1 => Self::regular(Point::new1(T::zero()), Point::new1(T::one()), &[cells]),
            2 => Self::regular(
                Point::new2(T::zero(), T::zero()),
                Point::new2(T::one(), T::one()),
                &[cells, cells],
            ),
            _ => Err(invalid("dim", dim as f64, "1 or 2")),
        }
    }

    pub fn with_constant_skewness(self, beta: T) -> Result<Self> {
        self.with_skewness(|_| beta)
    }

    pub fn with_skewness(mut self, beta: impl Fn(&Point<T>) -> T) -> Result<Self> {
        let skew: Vec<T> = self.centers.iter().map(beta).collect();
        if let Some(b) = skew.iter().find(|b| !(**b >= -T::one() && **b <= T::one())) {
            return Err(invalid("skewness", b.as_f64(), "a value in [-1, 1]"));
        }
        self.skewness = skew;
        Ok(self)
    }

    fn check_tiling(&self) -> Result<()> {
        let total: T = self.volumes.iter().copied().sum();
        let expected = self.box_volume();
        if self.volumes.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::Domain("cell volumes must be positive".into()));
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(self.len() as f64 * 4.0));
        if ((total - expected) / expected).abs() > tol {
            return Err(Error::Domain(format!(
                "cells cover volume {total} but the domain has volume {expected}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn lower(&self) -> Point<T> {
        self.lower
    }

    pub fn upper(&self) -> Point<T> {
        self.upper
    }

    /// Cells per axis.
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim()]
    }

    pub fn axis_centers(&self, axis: usize) -> &[T] {
        &self.axis_centers[axis]
    }

    pub fn centers(&self) -> &[Point<T>] {
        &self.centers
    }

    pub fn volumes(&self) -> &[T] {
        &self.volumes
    }

    pub fn skewness(&self) -> &[T] {
        &self.skewness
    }

    pub fn box_volume(&self) -> T {
        self.upper
            .sub(&self.lower)
            .coords()
            .iter()
            .fold(T::one(), |acc, &w| acc * w)
    }

    pub fn is_symmetric(&self) -> bool {
        self.skewness.iter().all(|b| *b == T::zero())
    }

    /// The grid extended by `ceil(n/2)` cells on both sides of every axis,
    /// so the box at least doubles and the original cells stay cells of the
    /// result. Skewness is reset to zero.
    pub fn doubled(&self) -> Result<Self> {
        let dim = self.dim();
        let mut lo = [T::zero(); 2];
        let mut hi = [T::zero(); 2];
        let mut cells = [0usize; 2];
        for a in 0..dim {
            let (l, u) = (self.lower.coords()[a], self.upper.coords()[a]);
            let n = self.shape[a];
            let pad = n.div_ceil(2);
            let width = (u - l) / T::from_usize(n).unwrap();
            let margin = width * T::from_usize(pad).unwrap();
            lo[a] = l - margin;
            hi[a] = u + margin;
            cells[a] = n + 2 * pad;
        }
        Self::regular(
            Point::from_slice(&lo[..dim])?,
            Point::from_slice(&hi[..dim])?,
            &cells[..dim],
        )
    }

    pub fn describe(&self) -> String {
        let shape: Vec<String> = self.shape().iter().map(|s| s.to_string()).collect();
        format!("[{}]..[{}] cells={}", self.lower, self.upper, shape.join("x"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_tiles() {
        let g = DiscreteMeasureGrid::<f64>::unit(2, 10).unwrap();
        assert_eq!(g.len(), 100);
        let total: f64 = g.volumes().iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.centers()[0].x(), 0.05);
        assert_relative_eq!(g.centers()[1].y(), 0.15);
        assert_eq!(g.shape(), &[10, 10]);
    }

    #[test]
    fn rejects_bad_skewness_and_bounds() {
        let g = DiscreteMeasureGrid::<f64>::unit(1, 4).unwrap();
        assert!(g.clone().with_constant_skewness(1.5).is_err());
        assert!(g.with_constant_skewness(-1.0).is_ok());
        assert!(DiscreteMeasureGrid::regular(Point::new1(1.0), Point::new1(0.0), &[3]).is_err());
        assert!(DiscreteMeasureGrid::regular(Point::new1(0.0), Point::new1(1.0), &[0]).is_err());
    }

    #[test]
    fn doubled_keeps_cell_size() {
        let g = DiscreteMeasureGrid::<f64>::unit(1, 8).unwrap();
        let d = g.doubled().unwrap();
        assert_eq!(d.len(), 16);
        assert_relative_eq!(d.lower().x(), -0.5);
        assert_relative_eq!(d.upper().x(), 1.5);
        assert_relative_eq!(d.volumes()[0], g.volumes()[0]);

        let odd = DiscreteMeasureGrid::<f64>::unit(1, 3).unwrap();
        let d = odd.doubled().unwrap();
        assert_eq!(d.len(), 7);
        for (a, b) in odd.axis_centers(0).iter().zip(&d.axis_centers(0)[2..5]) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }
}
