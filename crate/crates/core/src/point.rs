use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A location in R^1 or R^2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<T> {
    coords: [T; 2],
    dim: u8,
}

impl<T: Scalar> Point<T> {
    pub fn new1(x: T) -> Self {
        Self {
            coords: [x, T::zero()],
            dim: 1,
        }
    }

    pub fn new2(x: T, y: T) -> Self {
        Self {
            coords: [x, y],
            dim: 2,
        }
    }

    pub fn from_slice(c: &[T]) -> Result<Self> {
        match c {
            [x] => Ok(Self::new1(*x)),
            [x, y] => Ok(Self::new2(*x, *y)),
            _ => Err(Error::Domain(format!(
                "points must have 1 or 2 coordinates, got {}",
                c.len()
            ))),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn x(&self) -> T {
        self.coords[0]
    }

    /// Second coordinate; zero in one dimension.
    #[inline]
    pub fn y(&self) -> T {
        self.coords[1]
    }

    #[inline]
    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            coords: [
                self.coords[0] - other.coords[0],
                self.coords[1] - other.coords[1],
            ],
            dim: self.dim,
        }
    }

    #[inline]
    pub fn norm(&self) -> T {
        (self.coords[0] * self.coords[0] + self.coords[1] * self.coords[1]).sqrt()
    }

    #[inline]
    pub fn distance(&self, other: &Self) -> T {
        self.sub(other).norm()
    }

    /// Coordinatewise match within `tol`.
    pub fn coincides(&self, other: &Self, tol: T) -> bool {
        self.dim == other.dim
            && self
                .coords()
                .iter()
                .zip(other.coords())
                .all(|(a, b)| (*a - *b).abs() <= tol)
    }
}

impl<T: Scalar> fmt::Display for Point<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            write!(f, "{}", self.coords[0])
        } else {
            write!(f, "{},{}", self.coords[0], self.coords[1])
        }
    }
}

/// Parses `x` or `x,y`.
impl<T: Scalar> std::str::FromStr for Point<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let coords = s
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<T>()
                    .map_err(|_| Error::Parse(format!("bad coordinate `{c}` in point `{s}`")))
            })
            .collect::<Result<Vec<T>>>()?;
        Self::from_slice(&coords)
    }
}

/// Index of a point in `sites` that coincides with `p` within `tol`.
pub fn find_coincident<T: Scalar>(sites: &[Point<T>], p: &Point<T>, tol: T) -> Option<usize> {
    sites.iter().position(|s| s.coincides(p, tol))
}
