//! Affine rounding of a polytope so that hit-and-run mixes well.
//!
//! A shallow-cut ellipsoid iteration (cut depth `1/(2n)`) starting from the
//! ellipsoid of the bounding box finds `E(Q, c) ⊇ P'` whose homothetic copy
//! shrunk by `2n` lies inside `P'`. The returned map sends `E` to a ball and
//! is then scaled so that the largest origin-centred ball inside the image
//! has radius exactly one, giving `B(0,1) ⊆ T(P') ⊆ B(0,2n)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp;
use crate::model::{Halfspace, Polytope};

const MIN_WIDTH: f64 = 1e-10;

/// `x ↦ L x + t`.
#[derive(Clone, Debug)]
pub struct AffineMap {
    l: DMatrix<f64>,
    l_inv: DMatrix<f64>,
    t: DVector<f64>,
    log_det: f64,
}

impl AffineMap {
    pub fn new(l: DMatrix<f64>, t: DVector<f64>) -> Result<Self> {
        let n = l.nrows();
        if l.ncols() != n || t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: l.ncols().max(t.len()),
            });
        }
        let lu = l.clone().lu();
        let det = lu.determinant();
        let l_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::DegenerateBody("singular affine map".into()))?;
        Ok(AffineMap {
            l,
            l_inv,
            t,
            log_det: det.abs().ln(),
        })
    }

    fn from_parts(l: DMatrix<f64>, l_inv: DMatrix<f64>, t: DVector<f64>, log_det: f64) -> Self {
        AffineMap {
            l,
            l_inv,
            t,
            log_det,
        }
    }

    pub fn identity(n: usize) -> Self {
        AffineMap::from_parts(
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DVector::zeros(n),
            0.0,
        )
    }

    pub fn scaling(n: usize, factor: f64) -> Self {
        AffineMap::from_parts(
            DMatrix::identity(n, n) * factor,
            DMatrix::identity(n, n) / factor,
            DVector::zeros(n),
            n as f64 * factor.abs().ln(),
        )
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn linear_inv(&self) -> &DMatrix<f64> {
        &self.l_inv
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.t
    }

    /// `log |det L|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.l * DVector::from_column_slice(x) + &self.t;
        y.as_slice().to_vec()
    }

    pub fn apply_inv(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_inv_into(y, &mut out);
        out
    }

    /// Allocation-free `L⁻¹ (y - t)`.
    pub fn apply_inv_into(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, (yj, tj)) in y.iter().zip(self.t.iter()).enumerate() {
                acc += self.l_inv[(i, j)] * (yj - tj);
            }
            *o = acc;
        }
    }
}

/// Rows of `T(P')`: `a·x ≤ b` becomes `(L⁻ᵀ a)·y ≤ b + (L⁻ᵀ a)·t`.
pub fn transform_polytope(map: &AffineMap, p: &Polytope) -> Polytope {
    let rows = p
        .rows()
        .iter()
        .map(|r| {
            let a = map.l_inv.transpose() * DVector::from_column_slice(&r.a);
            let b = r.b + a.dot(&map.t);
            Halfspace::new(a.as_slice().to_vec(), b)
        })
        .collect();
    Polytope::new(p.dim(), rows).expect("invertible map keeps rows nonzero")
}

#[derive(Clone, Debug)]
pub struct Rounding {
    pub map: AffineMap,
    /// True when the ellipsoid iteration hit its cap and the bounding-box
    /// fallback was used; sampling stays exact, only mixing suffers.
    pub weak: bool,
    pub iterations: usize,
}

/// Largest `r` with `B(0, r) ⊆ Q`: the minimum over rows of `b_i / ‖a_i‖`.
pub fn inner_radius(q: &Polytope) -> f64 {
    q.rows()
        .iter()
        .map(|r| r.b / r.l2_norm())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub inner_radius: f64,
    /// Largest vertex norm of the bounding box of `T(P')`.
    pub box_vertex_radius: f64,
}

pub fn sandwich_report(map: &AffineMap, p: &Polytope) -> Result<SandwichReport> {
    let q = transform_polytope(map, p);
    let (lo, hi) = lp::real_bounds(&q)?;
    let box_vertex_radius = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| l.abs().max(h.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(SandwichReport {
        inner_radius: inner_radius(&q),
        box_vertex_radius,
    })
}

pub fn round_body(p: &Polytope) -> Result<Rounding> {
    let n = p.dim();
    let (lo, hi) = lp::real_bounds(p)?;
    if let Some(j) = (0..n).find(|&j| hi[j] - lo[j] < MIN_WIDTH) {
        return Err(Error::DegenerateBody(format!(
            "width {:e} along x{}",
            hi[j] - lo[j],
            j + 1
        )));
    }
    let (cheb, radius) = lp::chebyshev_center(p)?;
    if radius < MIN_WIDTH / 2.0 {
        return Err(Error::DegenerateBody(format!(
            "inscribed ball radius {radius:e}"
        )));
    }

    let half: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / 2.0).collect();
    let mut center = DVector::from_iterator(n, lo.iter().zip(&hi).map(|(l, h)| (l + h) / 2.0));
    let mut shape = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        half.iter().map(|h| n as f64 * h * h),
    ));

    let rows: Vec<(DVector<f64>, f64)> = p
        .rows()
        .iter()
        .map(|r| (DVector::from_column_slice(&r.a), r.b))
        .collect();
    let nf = n as f64;
    let shrink = 2.0 * nf;
    let cap = 50 * n * n;
    let mut iterations = 0;

    let converged = loop {
        // Most violated row of the shrunk ellipsoid test a·c + ‖a‖_Q / 2n ≤ b.
        let mut worst: Option<(f64, usize, DVector<f64>, f64)> = None;
        for (i, (a, b)) in rows.iter().enumerate() {
            let qa = &shape * a;
            let norm = a.dot(&qa).max(0.0).sqrt();
            if norm <= 0.0 {
                continue;
            }
            let depth = (a.dot(&center) - b) / norm;
            if worst.as_ref().is_none_or(|w| depth > w.0) {
                worst = Some((depth, i, qa, norm));
            }
        }
        let Some((depth, _, qa, norm)) = worst else {
            break false;
        };
        if depth <= -1.0 / shrink {
            break true;
        }
        if iterations >= cap || depth >= 1.0 || n == 1 {
            break false;
        }
        iterations += 1;

        let tau = (1.0 + nf * depth) / (nf + 1.0);
        let sigma = 2.0 * (1.0 + nf * depth) / ((nf + 1.0) * (1.0 + depth));
        let delta = nf * nf * (1.0 - depth * depth) / (nf * nf - 1.0);
        let g = &qa / norm;
        center -= &g * tau;
        shape = (&shape - (&g * g.transpose()) * sigma) * delta;
        shape = (&shape + shape.transpose()) * 0.5;
    };

    if converged {
        if let Some(map) = map_from_ellipsoid(p, &shape, &center) {
            return Ok(Rounding {
                map,
                weak: false,
                iterations,
            });
        }
    }
    Ok(Rounding {
        map: box_fallback(&half, &cheb),
        weak: true,
        iterations,
    })
}

/// `T(x) = C⁻¹ (x - c) / d` with `Q = C Cᵀ` and `d` the inner radius of
/// `C⁻¹ (P' - c)`.
fn map_from_ellipsoid(
    p: &Polytope,
    shape: &DMatrix<f64>,
    center: &DVector<f64>,
) -> Option<AffineMap> {
    let chol = shape.clone().cholesky()?;
    let c = chol.l();
    let c_inv = c.clone().try_inverse()?;
    let unit = AffineMap::from_parts(
        c_inv.clone(),
        c.clone(),
        -(&c_inv * center),
        -c.diagonal().iter().map(|v| v.abs().ln()).sum::<f64>(),
    );
    let d = inner_radius(&transform_polytope(&unit, p));
    if !(d > 0.0 && d.is_finite()) {
        return None;
    }
    let l = c_inv / d;
    let t = -(&l * center);
    let log_det = unit.log_det - p.dim() as f64 * d.ln();
    Some(AffineMap::from_parts(l, c * d, t, log_det))
}

/// Scale each axis by the bounding-box half-width, with the inscribed-ball
/// center sent to the origin so the walk can start there.
fn box_fallback(half: &[f64], cheb: &[f64]) -> AffineMap {
    let n = half.len();
    let l = DMatrix::from_diagonal(&DVector::from_iterator(n, half.iter().map(|h| 1.0 / h)));
    let l_inv = DMatrix::from_diagonal(&DVector::from_column_slice(half));
    let t = -(&l * DVector::from_column_slice(cheb));
    let log_det = -half.iter().map(|h| h.ln()).sum::<f64>();
    AffineMap::from_parts(l, l_inv, t, log_det)
}
