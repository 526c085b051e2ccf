//! Lattice coordinates, lexicographic order and causal regions.
//!
//! The causal "past" of a site `t` is the non-symmetric half-plane of its
//! lexicographic predecessors: every full row above `t`, plus the sites to the
//! left of `t` on its own row. Grids are 0-based and row-major.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site (or a lag between two sites): row `t1`, column `t2`.
///
/// The derived `Ord` is the lexicographic order: rows first, then columns.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Coord {
    pub t1: i64,
    pub t2: i64,
}

impl Coord {
    pub const fn new(t1: i64, t2: i64) -> Self {
        Self { t1, t2 }
    }

    /// True when the site lies in `[0, bounds.t1) x [0, bounds.t2)`.
    pub fn in_bounds(self, bounds: Coord) -> bool {
        self.t1 >= 0 && self.t2 >= 0 && self.t1 < bounds.t1 && self.t2 < bounds.t2
    }

    /// Row-major linear index inside `bounds`; caller guarantees `in_bounds`.
    #[inline]
    pub fn index(self, bounds: Coord) -> usize {
        (self.t1 * bounds.t2 + self.t2) as usize
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.t1, self.t2)
    }
}

impl Add for Coord {
    type Output = Coord;
    fn add(self, rhs: Coord) -> Coord {
        Coord::new(self.t1 + rhs.t1, self.t2 + rhs.t2)
    }
}

impl Sub for Coord {
    type Output = Coord;
    fn sub(self, rhs: Coord) -> Coord {
        Coord::new(self.t1 - rhs.t1, self.t2 - rhs.t2)
    }
}

/// Lexicographic comparison: `a < b` iff `a.t1 < b.t1`, or equal rows and `a.t2 < b.t2`.
pub fn lex_compare(a: Coord, b: Coord) -> Ordering {
    a.t1.cmp(&b.t1).then(a.t2.cmp(&b.t2))
}

/// The lexicographically ordered past of `center` inside a rectangular grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NshpRegion {
    pub center: Coord,
    pub bounds: Coord,
    pub coords: Vec<Coord>,
}

impl NshpRegion {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// All grid sites strictly preceding `center`, sorted ascending.
pub fn nshp_region(center: Coord, bounds: Coord) -> Result<NshpRegion> {
    if !center.in_bounds(bounds) {
        return Err(Error::OutOfBounds {
            coord: center,
            bounds,
        });
    }
    let count = (center.t1 * bounds.t2 + center.t2) as usize;
    let mut coords = Vec::with_capacity(count);
    for t1 in 0..=center.t1 {
        let end = if t1 == center.t1 {
            center.t2
        } else {
            bounds.t2
        };
        coords.extend((0..end).map(|t2| Coord::new(t1, t2)));
    }
    debug_assert_eq!(coords.len(), count);
    Ok(NshpRegion {
        center,
        bounds,
        coords,
    })
}

/// Region of support `H_{p,q}` of a causal 2D autoregression.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosLagSet {
    pub p: usize,
    pub q: usize,
    pub lags: Vec<Coord>,
}

impl RosLagSet {
    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// Largest absolute row and column lag.
    pub fn extent(&self) -> (usize, usize) {
        let r = self
            .lags
            .iter()
            .map(|l| l.t1.unsigned_abs())
            .max()
            .unwrap_or(0);
        let c = self
            .lags
            .iter()
            .map(|l| l.t2.unsigned_abs())
            .max()
            .unwrap_or(0);
        (r as usize, c as usize)
    }
}

/// `{(j,k): 1 <= j <= p, |k| <= q} ∪ {(0,k): 1 <= k <= q}`, lex-sorted.
pub fn ros_lags(p: usize, q: usize) -> Result<RosLagSet> {
    if p == 0 && q == 0 {
        return Err(Error::EmptyModel);
    }
    let (pi, qi) = (p as i64, q as i64);
    let mut lags: Vec<Coord> = (1..=qi).map(|k| Coord::new(0, k)).collect();
    for j in 1..=pi {
        lags.extend((-qi..=qi).map(|k| Coord::new(j, k)));
    }
    lags.sort();
    Ok(RosLagSet { p, q, lags })
}

/// True iff every lag lies in the causal half-plane `{j >= 1} ∪ {j = 0, k >= 1}`.
pub fn check_causal(lags: &[Coord]) -> bool {
    lags.iter().all(|l| l.t1 >= 1 || (l.t1 == 0 && l.t2 >= 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lex_examples() {
        assert_eq!(
            lex_compare(Coord::new(1, 5), Coord::new(2, 0)),
            Ordering::Less
        );
        assert_eq!(
            lex_compare(Coord::new(3, 3), Coord::new(3, 3)),
            Ordering::Equal
        );
        assert_eq!(
            lex_compare(Coord::new(4, 2), Coord::new(4, 1)),
            Ordering::Greater
        );
    }

    #[test]
    fn derived_ord_matches_lex_compare() {
        let a = Coord::new(2, -7);
        let b = Coord::new(2, 3);
        assert_eq!(a.cmp(&b), lex_compare(a, b));
    }

    #[test]
    fn region_examples() {
        assert!(nshp_region(Coord::new(0, 0), Coord::new(5, 5))
            .unwrap()
            .is_empty());

        let r = nshp_region(Coord::new(2, 2), Coord::new(5, 5)).unwrap();
        assert_eq!(r.len(), 12);
        assert_eq!(r.coords[10], Coord::new(2, 0));
        assert_eq!(r.coords[11], Coord::new(2, 1));

        let r = nshp_region(Coord::new(50, 50), Coord::new(102, 102)).unwrap();
        assert_eq!(r.len(), 5150);
    }

    #[test]
    fn region_rejects_out_of_bounds_center() {
        assert!(matches!(
            nshp_region(Coord::new(5, 0), Coord::new(5, 5)),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(nshp_region(Coord::new(0, -1), Coord::new(5, 5)).is_err());
    }

    #[test]
    fn ros_examples() {
        let r = ros_lags(1, 1).unwrap();
        assert_eq!(
            r.lags,
            vec![
                Coord::new(0, 1),
                Coord::new(1, -1),
                Coord::new(1, 0),
                Coord::new(1, 1)
            ]
        );
        assert_eq!(ros_lags(2, 2).unwrap().len(), 12);
        assert_eq!(ros_lags(1, 0).unwrap().lags, vec![Coord::new(1, 0)]);
        assert!(matches!(ros_lags(0, 0), Err(Error::EmptyModel)));
    }

    #[test]
    fn causality() {
        assert!(check_causal(&ros_lags(1, 1).unwrap().lags));
        assert!(!check_causal(&[Coord::new(1, 0), Coord::new(-1, 0)]));
        assert!(!check_causal(&[Coord::new(0, -1)]));
        assert!(!check_causal(&[Coord::new(0, 0)]));
    }
}
