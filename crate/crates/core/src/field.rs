use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Coord;
use crate::real::{mean_sd, Real};

/// Real-valued field on an `n1 x n2` lattice, row-major, with an optional
/// observation mask (`true` = observed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid<T> {
    bounds: Coord,
    values: Vec<T>,
    mask: Option<Vec<bool>>,
}

impl<T: Real> FieldGrid<T> {
    pub fn new(n1: usize, n2: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n1 * n2 {
            return Err(Error::Domain(format!(
                "field of {n1}x{n2} needs {} values, got {}",
                n1 * n2,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value at linear index {i}"
            )));
        }
        Ok(Self {
            bounds: Coord::new(n1 as i64, n2 as i64),
            values,
            mask: None,
        })
    }

    pub fn from_fn(n1: usize, n2: usize, mut f: impl FnMut(Coord) -> T) -> Result<Self> {
        let values = (0..n1 as i64)
            .flat_map(|t1| (0..n2 as i64).map(move |t2| Coord::new(t1, t2)))
            .map(&mut f)
            .collect();
        Self::new(n1, n2, values)
    }

    /// A field that is only observed where `mask` is `true`. Masked-out cells
    /// may hold any value (they are set to zero).
    pub fn with_mask(n1: usize, n2: usize, mut values: Vec<T>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n1 * n2 || values.len() != n1 * n2 {
            return Err(Error::Domain("mask and values must cover the grid".into()));
        }
        for (v, &m) in values.iter_mut().zip(&mask) {
            if !m {
                *v = T::zero();
            }
        }
        let mut f = Self::new(n1, n2, values)?;
        f.mask = Some(mask);
        Ok(f)
    }

    pub fn bounds(&self) -> Coord {
        self.bounds
    }

    pub fn n1(&self) -> usize {
        self.bounds.t1 as usize
    }

    pub fn n2(&self) -> usize {
        self.bounds.t2 as usize
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Value at an in-bounds site, ignoring the mask.
    #[inline]
    pub fn get(&self, c: Coord) -> T {
        self.values[c.index(self.bounds)]
    }

    pub fn is_observed(&self, c: Coord) -> bool {
        c.in_bounds(self.bounds) && self.mask.as_ref().is_none_or(|m| m[c.index(self.bounds)])
    }

    /// Value at `c` when the site is inside the grid and observed.
    #[inline]
    pub fn observed(&self, c: Coord) -> Option<T> {
        self.is_observed(c).then(|| self.get(c))
    }

    pub fn set(&mut self, c: Coord, v: T) {
        let i = c.index(self.bounds);
        self.values[i] = v;
    }

    /// Values along an ordering of sites.
    pub fn gather(&self, ordering: &[Coord]) -> Vec<T> {
        ordering.iter().map(|&c| self.get(c)).collect()
    }

    /// Sample standard deviation of the values on `ordering`.
    pub fn sd_over(&self, ordering: &[Coord]) -> T {
        mean_sd(&self.gather(ordering)).1
    }

    /// Copy with every value shifted by `c`.
    pub fn shifted(&self, c: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += c);
        out
    }

    /// Rectangular sub-window starting at `origin` with extent `bounds`.
    pub fn window(&self, origin: Coord, bounds: Coord) -> Result<Self> {
        let last = origin + bounds - Coord::new(1, 1);
        if !origin.in_bounds(self.bounds) || !last.in_bounds(self.bounds) {
            return Err(Error::OutOfBounds {
                coord: last,
                bounds: self.bounds,
            });
        }
        let mut out = Self::from_fn(bounds.t1 as usize, bounds.t2 as usize, |c| {
            self.get(origin + c)
        })?;
        if let Some(mask) = &self.mask {
            out.mask = Some(
                (0..bounds.t1)
                    .flat_map(|t1| (0..bounds.t2).map(move |t2| Coord::new(t1, t2)))
                    .map(|c| mask[(origin + c).index(self.bounds)])
                    .collect(),
            );
        }
        Ok(out)
    }
}
