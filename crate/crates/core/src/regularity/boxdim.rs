use serde::{Deserialize, Serialize};

use super::estimate::least_squares;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum number of points for a box-counting estimate.
pub const BOX_MIN_POINTS: usize = 50;

/// Dyadic box sizes `2^-finest ..= 2^-coarsest`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxScales {
    pub finest: i32,
    pub coarsest: i32,
}

impl BoxScales {
    pub fn new(finest: i32, coarsest: i32) -> Self {
        BoxScales { finest, coarsest }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    pub dimension: f64,
    pub r2: f64,
    /// `(box size, occupied boxes)` per scale.
    pub counts: Vec<(f64, usize)>,
}

fn occupied<R: Real>(points: &[R], eps: f64) -> usize {
    let mut cells: Vec<i64> = points.iter().map(|p| (p.f64() / eps).floor() as i64).collect();
    cells.sort_unstable();
    cells.dedup();
    cells.len()
}

/// Box-counting dimension: slope of `log N(eps)` against `log(1/eps)`. Returns `Ok(None)`
/// (indeterminate) for fewer than [`BOX_MIN_POINTS`] points, except that a single distinct
/// point has dimension 0.
pub fn box_dimension<R: Real>(points: &[R], scales: BoxScales) -> Result<Option<BoxDimension>> {
    if scales.finest - scales.coarsest + 1 < 4 {
        return Err(Error::OutOfRange("box counting needs at least four dyadic scales".into()));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.f64()).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() == 1 {
        return Ok(Some(BoxDimension { dimension: 0.0, r2: 1.0, counts: Vec::new() }));
    }
    if points.len() < BOX_MIN_POINTS {
        return Ok(None);
    }
    let counts: Vec<(f64, usize)> =
        (scales.coarsest..=scales.finest).map(|i| 2f64.powi(-i)).map(|eps| (eps, occupied(points, eps))).collect();
    let xs: Vec<f64> = counts.iter().map(|(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, n)| (*n as f64).ln()).collect();
    let fit = least_squares(&xs, &ys).ok_or_else(|| Error::Insufficient("degenerate box counts".into()))?;
    Ok(Some(BoxDimension { dimension: fit.slope, r2: fit.r2, counts }))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn integer_shift_keeps_the_dimension(pts in proptest::collection::vec(0.0f64..1.0, 60..400), shift in -3i32..3) {
            let a = box_dimension(&pts, BoxScales::new(8, 2)).unwrap();
            let moved: Vec<f64> = pts.iter().map(|p| p + shift as f64).collect();
            let b = box_dimension(&moved, BoxScales::new(8, 2)).unwrap();
            match (a, b) {
                (Some(a), Some(b)) => {
                    prop_assert_eq!(&a.counts, &b.counts);
                    prop_assert!(a.dimension >= -1e-12 && a.dimension <= 1.0 + 1e-12);
                }
                (None, None) => {}
                _ => prop_assert!(false, "shift changed admissibility"),
            }
        }
    }
}
