//! Exact lattice counting by enumeration over the integer bounding box.
//!
//! Coordinates are fixed one at a time in lexicographic order. For every
//! partial assignment the range of the next coordinate is narrowed by
//! single-row interval arithmetic against the box, and optionally by two
//! small LPs giving the exact real projection, which keeps rotated thin
//! bodies cheap even when their bounding box is enormous.

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{self, LpStatus};
use crate::model::{Halfspace, LatticePoint, Polytope};

pub const DEFAULT_LIMIT: u64 = 100_000_000;
/// Point lists are only returned up to this many points.
pub const MAX_DUMP: u64 = 100_000;

const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pruning {
    /// Single-row interval bounds only.
    Interval,
    /// Interval bounds plus the exact LP projection of each prefix.
    Projection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub count: BigUint,
    /// Lattice points in the bounding box.
    pub enumerated: BigUint,
    pub points: Option<Vec<LatticePoint>>,
}

pub fn exact_count(p: &Polytope, limit: &BigUint, want_points: bool) -> Result<OracleResult> {
    exact_count_with(p, limit, want_points, Pruning::Projection)
}

pub fn exact_count_with(
    p: &Polytope,
    limit: &BigUint,
    want_points: bool,
    pruning: Pruning,
) -> Result<OracleResult> {
    let rect = match lp::get_rect(p) {
        Ok(r) => r,
        Err(Error::Infeasible) | Err(Error::NoLatticePoints) => {
            return Ok(OracleResult {
                count: BigUint::from(0u8),
                enumerated: BigUint::from(0u8),
                points: want_points.then(Vec::new),
            })
        }
        Err(e) => return Err(e),
    };
    let enumerated = rect.lattice_count();
    if &enumerated > limit {
        return Err(Error::OracleLimit {
            box_size: enumerated.to_string(),
            limit: limit.to_string(),
        });
    }
    let e = Enumerator {
        p,
        lo: &rect.lo,
        hi: &rect.hi,
        pruning,
    };
    let run = |mut prefix: Vec<i64>| {
        let mut pts = Vec::new();
        let c = e.count_from(&mut prefix, want_points.then_some(&mut pts));
        (c, pts)
    };
    let per_first: Vec<(u128, Vec<LatticePoint>)> = if p.dim() == 1 {
        vec![run(Vec::new())]
    } else {
        (rect.lo[0]..=rect.hi[0])
            .into_par_iter()
            .map(|x0| run(vec![x0]))
            .collect()
    };
    let count: u128 = per_first.iter().map(|(c, _)| c).sum();
    let points = if want_points && count <= MAX_DUMP as u128 {
        Some(per_first.into_iter().flat_map(|(_, p)| p).collect())
    } else {
        None
    };
    Ok(OracleResult {
        count: BigUint::from(count),
        enumerated,
        points,
    })
}

struct Enumerator<'a> {
    p: &'a Polytope,
    lo: &'a [i64],
    hi: &'a [i64],
    pruning: Pruning,
}

impl Enumerator<'_> {
    /// Integer range of coordinate `k = prefix.len()` given the fixed prefix.
    fn range(&self, prefix: &[i64]) -> Option<(i64, i64)> {
        let k = prefix.len();
        let n = self.p.dim();
        let mut lo = self.lo[k] as f64;
        let mut hi = self.hi[k] as f64;
        for row in self.p.rows() {
            let ak = row.a[k];
            if ak == 0.0 {
                continue;
            }
            let mut rest = row.b;
            for (j, &x) in prefix.iter().enumerate() {
                rest -= row.a[j] * x as f64;
            }
            for j in k + 1..n {
                let a = row.a[j];
                rest -= (a * self.lo[j] as f64).min(a * self.hi[j] as f64);
            }
            let bound = rest / ak;
            if ak > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        if self.pruning == Pruning::Projection && k > 0 && k + 1 < n {
            let (plo, phi) = self.projection(prefix)?;
            lo = lo.max(plo);
            hi = hi.min(phi);
        }
        let lo = (lo - EPS * (1.0 + lo.abs())).ceil();
        let hi = (hi + EPS * (1.0 + hi.abs())).floor();
        (lo <= hi).then_some((lo as i64, hi as i64))
    }

    /// Real range of coordinate `k` over `P` with the prefix substituted.
    fn projection(&self, prefix: &[i64]) -> Option<(f64, f64)> {
        let k = prefix.len();
        let n = self.p.dim();
        let m = n - k;
        let rows: Vec<Halfspace> = self
            .p
            .rows()
            .iter()
            .map(|r| {
                let fixed: f64 = prefix.iter().zip(&r.a).map(|(&x, a)| a * x as f64).sum();
                Halfspace::new(r.a[k..].to_vec(), r.b - fixed)
            })
            .collect();
        let mut c = vec![0.0; m];
        c[0] = 1.0;
        let up = lp::maximize_rows(&c, &rows, m).ok()?;
        c[0] = -1.0;
        let down = lp::maximize_rows(&c, &rows, m).ok()?;
        match (up.status, down.status) {
            (LpStatus::Optimal, LpStatus::Optimal) => Some((-down.value, up.value)),
            // Rounding noise can make a touching prefix look infeasible; fall
            // back to the interval bounds rather than dropping it.
            _ => Some((f64::NEG_INFINITY, f64::INFINITY)),
        }
    }

    fn count_from(&self, prefix: &mut Vec<i64>, mut out: Option<&mut Vec<LatticePoint>>) -> u128 {
        let n = self.p.dim();
        let Some((lo, hi)) = self.range(prefix) else {
            return 0;
        };
        if prefix.len() + 1 == n {
            let mut total = 0u128;
            // The interval bounds are exact once every other coordinate is
            // fixed, but membership is rechecked with the shared tolerance.
            for x in lo..=hi {
                prefix.push(x);
                let q = LatticePoint(prefix.clone());
                if self.p.contains_lattice_unchecked(&q) {
                    total += 1;
                    if let Some(o) = out.as_deref_mut() {
                        o.push(q);
                    }
                }
                prefix.pop();
            }
            return total;
        }
        let mut total = 0;
        for x in lo..=hi {
            prefix.push(x);
            total += self.count_from(prefix, out.as_deref_mut());
            prefix.pop();
        }
        total
    }
}

/// Every lattice point of the bounding box, checked one by one. Test helper
/// for small boxes.
pub fn brute_force_count(p: &Polytope) -> Result<u64> {
    let rect = match lp::get_rect(p) {
        Ok(r) => r,
        Err(Error::Infeasible) | Err(Error::NoLatticePoints) => return Ok(0),
        Err(e) => return Err(e),
    };
    let n = p.dim();
    let mut x = rect.lo.clone();
    let mut count = 0;
    loop {
        if p.contains_lattice_unchecked(&LatticePoint(x.clone())) {
            count += 1;
        }
        let mut j = 0;
        loop {
            if j == n {
                return Ok(count);
            }
            if x[j] < rect.hi[j] {
                x[j] += 1;
                break;
            }
            x[j] = rect.lo[j];
            j += 1;
        }
    }
}
