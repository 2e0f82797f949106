//! Dense two-phase tableau simplex for `max c·x s.t. A x ≤ b` with free `x`,
//! and the bounding-rectangle computation built on it.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Halfspace, Polytope};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 500;
/// Safety margin applied before flooring/ceiling LP bounds.
const RECT_SLACK: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub value: f64,
    pub argmax: Option<Vec<f64>>,
}

impl LpResult {
    fn unbounded() -> Self {
        LpResult {
            status: LpStatus::Unbounded,
            value: f64::INFINITY,
            argmax: None,
        }
    }

    fn infeasible() -> Self {
        LpResult {
            status: LpStatus::Infeasible,
            value: f64::NEG_INFINITY,
            argmax: None,
        }
    }
}

/// Scratch tableau. Columns: `u_1..u_n, v_1..v_n` (x = u - v), `m` slacks,
/// then one artificial per row whose right-hand side was negative.
struct Tableau {
    width: usize,
    data: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    rows: usize,
    pivots: usize,
    cap: usize,
    degenerate_run: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] *= inv;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (x, p) in self.obj.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Maximizes the objective held in `obj` (stored as reduced costs
    /// `z_j - c_j`) using columns `< col_limit`.
    fn optimize(&mut self, col_limit: usize) -> Result<Outcome> {
        loop {
            let bland = self.degenerate_run >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..col_limit {
                let rc = self.obj[j];
                if rc < -COST_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if rc < best {
                        best = rc;
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else {
                return Ok(Outcome::Optimal);
            };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(Outcome::Unbounded);
            };

            if self.pivots >= self.cap {
                return Err(Error::LpIterationCap { limit: self.cap });
            }
            self.pivots += 1;
            if best_ratio <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(r, c);
        }
    }
}

/// `max c·x` subject to the given rows over `R^n`.
pub fn maximize_rows(c: &[f64], rows: &[Halfspace], n: usize) -> Result<LpResult> {
    if c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.len(),
        });
    }
    let m = rows.len();
    let negative: Vec<usize> = (0..m).filter(|&i| rows[i].b < 0.0).collect();
    let n_art = negative.len();
    let n_struct = 2 * n + m;
    let width = n_struct + n_art + 1;
    let mut data = vec![0.0; m * width];
    let mut basis = vec![0; m];

    let mut art = 0;
    for (i, row) in rows.iter().enumerate() {
        let scale = row.a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        let sign = if row.b < 0.0 { -1.0 } else { 1.0 };
        let base = i * width;
        for j in 0..n {
            data[base + j] = sign * scale * row.a[j];
            data[base + n + j] = -sign * scale * row.a[j];
        }
        data[base + 2 * n + i] = sign;
        data[base + width - 1] = sign * scale * row.b;
        if sign < 0.0 {
            data[base + n_struct + art] = 1.0;
            basis[i] = n_struct + art;
            art += 1;
        } else {
            basis[i] = 2 * n + i;
        }
    }

    let mut t = Tableau {
        width,
        data,
        obj: vec![0.0; width],
        basis,
        rows: m,
        pivots: 0,
        cap: 50 * (m + 2 * n),
        degenerate_run: 0,
    };

    if n_art > 0 {
        // Phase 1: maximize -Σ artificials.
        for k in 0..n_art {
            t.obj[n_struct + k] = 1.0;
        }
        for &i in &negative {
            for j in 0..width {
                t.obj[j] -= t.data[i * width + j];
            }
        }
        t.optimize(n_struct + n_art)?;
        let phase_one_value = t.obj[width - 1];
        if phase_one_value < -FEAS_TOL * (1.0 + max_abs_rhs(&t)) {
            return Ok(LpResult::infeasible());
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m {
            if t.basis[i] >= n_struct {
                if let Some(j) = (0..n_struct).find(|&j| t.at(i, j).abs() > 1e-9) {
                    t.pivot(i, j);
                }
            }
        }
    }

    // Phase 2 objective: maximize c·u - c·v.
    t.obj.iter_mut().for_each(|x| *x = 0.0);
    for (j, &cj) in c.iter().enumerate() {
        t.obj[j] = -cj;
        t.obj[n + j] = cj;
    }
    for i in 0..m {
        let bj = t.basis[i];
        let f = t.obj[bj];
        if f != 0.0 {
            for j in 0..width {
                t.obj[j] -= f * t.data[i * width + j];
            }
        }
    }
    t.degenerate_run = 0;
    if let Outcome::Unbounded = t.optimize(n_struct)? {
        return Ok(LpResult::unbounded());
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        let bj = t.basis[i];
        if bj < n {
            x[bj] += t.rhs(i);
        } else if bj < 2 * n {
            x[bj - n] -= t.rhs(i);
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpResult {
        status: LpStatus::Optimal,
        value,
        argmax: Some(x),
    })
}

fn max_abs_rhs(t: &Tableau) -> f64 {
    (0..t.rows).fold(0.0f64, |s, i| s.max(t.rhs(i).abs()))
}

pub fn maximize(c: &[f64], p: &Polytope) -> Result<LpResult> {
    maximize_rows(c, p.rows(), p.dim())
}

fn axis(n: usize, j: usize, sign: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = sign;
    e
}

/// Real per-coordinate bounds `(min x_j, max x_j)` over `P`, via `2n` LPs.
pub fn real_bounds(p: &Polytope) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.dim();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for j in 0..n {
        for (sign, slot) in [(1.0, &mut hi[j]), (-1.0, &mut lo[j])] {
            let res = maximize(&axis(n, j, sign), p)?;
            match res.status {
                LpStatus::Optimal => *slot = sign * res.value,
                LpStatus::Unbounded => {
                    return Err(Error::Unbounded {
                        direction: format!("{}x{}", if sign > 0.0 { "+" } else { "-" }, j + 1),
                    })
                }
                LpStatus::Infeasible => return Err(Error::Infeasible),
            }
        }
    }
    Ok((lo, hi))
}

/// Center and radius of the largest ball inscribed in `P`.
pub fn chebyshev_center(p: &Polytope) -> Result<(Vec<f64>, f64)> {
    let n = p.dim();
    let mut rows: Vec<Halfspace> = p
        .rows()
        .iter()
        .map(|r| {
            let mut a = r.a.clone();
            a.push(r.l2_norm());
            Halfspace::new(a, r.b)
        })
        .collect();
    rows.push(Halfspace::new(axis(n + 1, n, -1.0), 0.0));
    let res = maximize_rows(&axis(n + 1, n, 1.0), &rows, n + 1)?;
    match res.status {
        LpStatus::Optimal => {
            let mut x = res.argmax.unwrap();
            let r = x.pop().unwrap();
            Ok((x, r))
        }
        LpStatus::Unbounded => Err(Error::Unbounded {
            direction: "inscribed ball radius".into(),
        }),
        LpStatus::Infeasible => Err(Error::Infeasible),
    }
}

/// Integer bounding box of a polytope; contains every lattice point of it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rectangle {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl Rectangle {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn to_polytope(&self) -> Polytope {
        let lo: Vec<f64> = self.lo.iter().map(|&v| v as f64).collect();
        let hi: Vec<f64> = self.hi.iter().map(|&v| v as f64).collect();
        Polytope::from_box(&lo, &hi).expect("rectangle has n >= 1")
    }

    pub fn lattice_count(&self) -> BigUint {
        rect_lattice_count(self)
    }
}

pub fn get_rect(p: &Polytope) -> Result<Rectangle> {
    let (lo, hi) = real_bounds(p)?;
    let lo: Vec<i64> = lo.iter().map(|v| (v - RECT_SLACK).ceil() as i64).collect();
    let hi: Vec<i64> = hi.iter().map(|v| (v + RECT_SLACK).floor() as i64).collect();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Err(Error::NoLatticePoints);
    }
    Ok(Rectangle { lo, hi })
}

/// `∏ (hi_j - lo_j + 1)` as an arbitrary-precision integer.
pub fn rect_lattice_count(r: &Rectangle) -> BigUint {
    r.lo.iter()
        .zip(&r.hi)
        .map(|(&l, &h)| BigUint::from((h - l + 1) as u64))
        .product()
}
