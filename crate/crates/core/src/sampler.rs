//! Near-uniform lattice sampling by rejection from a coordinate-direction
//! hit-and-run walk.
//!
//! Every facet of `P` is pushed outward by `½‖a_i‖₁`, so the unit cube around
//! each lattice point of `P` lies in the enlarged body `P'`. The walk runs in
//! the rounded image `T(P')`; a walk point `p` yields the lattice candidate
//! `round(T⁻¹ p)`, accepted iff it lies in `P`. With a uniform walk every
//! lattice point of `P` is then equally likely, and the acceptance rate is
//! `|P ∩ Zⁿ| / Vol(P')`.

use crate::error::{Error, Result};
use crate::lp;
use crate::model::{round_real, Halfspace, LatticePoint, Polytope};
use crate::rng::Rng;
use crate::rounding::{self, AffineMap};

/// Coefficients below this magnitude are treated as parallel to the direction.
const PARALLEL_TOL: f64 = 1e-12;
const MIN_CHORD: f64 = 1e-12;
/// Incremental slacks are recomputed from scratch this often.
const REFRESH_EVERY: usize = 1024;

#[derive(Clone, Debug)]
pub struct ShiftedPolytope {
    pub base: Polytope,
    pub shifts: Vec<f64>,
    pub enlarged: Polytope,
    pub map: AffineMap,
    pub transformed: Polytope,
    /// The rounding fell back to the bounding-box map.
    pub weak_rounding: bool,
}

/// `max a·x` over the cube `[-½, ½]ⁿ`, attained at `x_j = ½ sign(a_j)`.
pub fn facet_shift(row: &Halfspace) -> f64 {
    0.5 * row.l1_norm()
}

/// The same shift obtained by solving the box-constrained LP; kept for
/// cross-checking the closed form.
pub fn facet_shift_lp(row: &Halfspace) -> Result<f64> {
    let n = row.a.len();
    let cube = Polytope::from_box(&vec![-0.5; n], &vec![0.5; n])?;
    let res = lp::maximize(&row.a, &cube)?;
    Ok(res.value)
}

pub fn shift_facets(p: &Polytope) -> Result<ShiftedPolytope> {
    let shifts: Vec<f64> = p.rows().iter().map(facet_shift).collect();
    let rows = p
        .rows()
        .iter()
        .zip(&shifts)
        .map(|(r, v)| Halfspace::new(r.a.clone(), r.b + v))
        .collect();
    let enlarged = Polytope::new(p.dim(), rows)?;
    let rounded = rounding::round_body(&enlarged)?;
    let transformed = rounding::transform_polytope(&rounded.map, &enlarged);
    Ok(ShiftedPolytope {
        base: p.clone(),
        shifts,
        enlarged,
        map: rounded.map,
        transformed,
        weak_rounding: rounded.weak,
    })
}

/// Coordinate hit-and-run state on a fixed polytope, with incrementally
/// maintained slacks `b_i - a_i·p`.
pub struct Walker<'a> {
    q: &'a Polytope,
    /// `columns[j][i] = a_ij`
    columns: Vec<Vec<f64>>,
    pos: Vec<f64>,
    slack: Vec<f64>,
    since_refresh: usize,
}

impl<'a> Walker<'a> {
    pub fn new(q: &'a Polytope, start: &[f64]) -> Result<Self> {
        if !q.contains_real(start, 1e-9)? {
            return Err(Error::Precondition(
                "walk start point lies outside the body".into(),
            ));
        }
        let n = q.dim();
        let columns = (0..n)
            .map(|j| q.rows().iter().map(|r| r.a[j]).collect())
            .collect();
        let mut w = Walker {
            q,
            columns,
            pos: start.to_vec(),
            slack: Vec::new(),
            since_refresh: 0,
        };
        w.refresh();
        Ok(w)
    }

    fn refresh(&mut self) {
        self.slack = self
            .q
            .rows()
            .iter()
            .map(|r| r.b - r.dot(&self.pos))
            .collect();
        self.since_refresh = 0;
    }

    pub fn position(&self) -> &[f64] {
        &self.pos
    }

    /// Feasible step range `[λ⁻, λ⁺]` along coordinate `j`.
    pub fn chord(&self, j: usize) -> Result<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (a, s) in self.columns[j].iter().zip(&self.slack) {
            let s = s.max(0.0);
            if *a > PARALLEL_TOL {
                hi = hi.min(s / a);
            } else if *a < -PARALLEL_TOL {
                lo = lo.max(s / a);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Unbounded {
                direction: format!("x{} (walk chord)", j + 1),
            });
        }
        Ok((lo, hi))
    }

    /// Moves along coordinate `j` to a uniform point of the chord.
    /// Returns false when the chord is shorter than the minimum length.
    pub fn step_along(&mut self, j: usize, rng: &mut Rng) -> Result<bool> {
        let (lo, hi) = self.chord(j)?;
        if hi - lo < MIN_CHORD {
            return Ok(false);
        }
        let lambda = rng.uniform(lo, hi);
        self.pos[j] += lambda;
        for (s, a) in self.slack.iter_mut().zip(&self.columns[j]) {
            *s -= lambda * a;
        }
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.refresh();
        }
        Ok(true)
    }

    /// One hit-and-run step in a uniformly chosen coordinate direction,
    /// retrying up to `n` times on degenerate chords.
    pub fn step(&mut self, rng: &mut Rng) -> Result<()> {
        let n = self.q.dim();
        for _ in 0..=n {
            let j = rng.index(n);
            if self.step_along(j, rng)? {
                return Ok(());
            }
        }
        Err(Error::DegenerateBody(format!(
            "hit-and-run chord shorter than {MIN_CHORD:e} in {} tries",
            n + 1
        )))
    }

    pub fn walk(&mut self, w: usize, rng: &mut Rng) -> Result<()> {
        for _ in 0..w {
            self.step(rng)?;
        }
        Ok(())
    }
}

pub fn hit_and_run_step(q: &Polytope, p: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    let mut walker = Walker::new(q, p)?;
    walker.step(rng)?;
    Ok(walker.pos)
}

pub fn walk(q: &Polytope, p: &[f64], w: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if w == 0 {
        return Err(Error::Precondition("walk length must be at least 1".into()));
    }
    let mut walker = Walker::new(q, p)?;
    walker.walk(w, rng)?;
    Ok(walker.pos)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSet {
    pub points: Vec<LatticePoint>,
    /// Walk endpoints generated, accepted or not.
    pub attempts: u64,
    /// `attempts` at the moment each point was accepted.
    pub accepted_at: Vec<u64>,
}

impl SampleSet {
    pub fn accepted(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            return 0.0;
        }
        self.points.len() as f64 / self.attempts as f64
    }

    pub fn extend(&mut self, other: SampleSet) {
        let base = self.attempts;
        self.points.extend(other.points);
        self.accepted_at
            .extend(other.accepted_at.iter().map(|a| a + base));
        self.attempts += other.attempts;
    }

    /// Attempts a run stopping after `k` acceptances would have used.
    pub fn attempts_at(&self, k: usize) -> u64 {
        match k {
            0 => 0,
            k if k >= self.points.len() => self.attempts,
            k => self.accepted_at[k - 1],
        }
    }

    /// The first `k` points, as if sampling had stopped there.
    pub fn prefix(&self, k: usize) -> SampleSet {
        let k = k.min(self.points.len());
        SampleSet {
            points: self.points[..k].to_vec(),
            attempts: self.attempts_at(k),
            accepted_at: self.accepted_at[..k].to_vec(),
        }
    }
}

pub fn rejection_cap(s: usize) -> u64 {
    (100_000u64).max(10_000 * s as u64)
}

/// Draws `s` lattice points of `sp.base`, walking `w` steps per attempt from
/// `start` (a point of the transformed body). The walk position carries over
/// between attempts, accepted or rejected.
pub fn sample_lattice(
    sp: &ShiftedPolytope,
    s: usize,
    w: usize,
    rng: &mut Rng,
    start: &[f64],
) -> Result<SampleSet> {
    sample_lattice_capped(sp, s, w, rng, start, rejection_cap(s))
}

pub fn sample_lattice_capped(
    sp: &ShiftedPolytope,
    s: usize,
    w: usize,
    rng: &mut Rng,
    start: &[f64],
    max_attempts: u64,
) -> Result<SampleSet> {
    if s == 0 {
        return Err(Error::Precondition(
            "sample count must be at least 1".into(),
        ));
    }
    if w == 0 {
        return Err(Error::Precondition("walk length must be at least 1".into()));
    }
    let n = sp.base.dim();
    let mut walker = Walker::new(&sp.transformed, start)?;
    let mut out = SampleSet {
        points: Vec::with_capacity(s),
        attempts: 0,
        accepted_at: Vec::with_capacity(s),
    };
    let mut real = vec![0.0; n];
    while out.points.len() < s {
        if out.attempts >= max_attempts {
            return Err(Error::RejectionCap {
                attempts: out.attempts,
                accepted: out.points.len(),
                requested: s,
            });
        }
        walker.walk(w, rng)?;
        out.attempts += 1;
        sp.map.apply_inv_into(walker.position(), &mut real);
        let q = round_real(&real);
        if sp.base.contains_lattice_unchecked(&q) {
            out.points.push(q);
            out.accepted_at.push(out.attempts);
        }
    }
    Ok(out)
}

/// Convenience: shift, round and sample from the transformed origin.
pub fn sample_polytope(p: &Polytope, s: usize, w: usize, rng: &mut Rng) -> Result<SampleSet> {
    let sp = shift_facets(p)?;
    let origin = vec![0.0; p.dim()];
    sample_lattice(&sp, s, w, rng, &origin)
}
