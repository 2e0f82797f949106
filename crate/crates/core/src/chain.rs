//! Construction of the nested chain `P_0 ⊃ P_1 ⊃ … ⊃ P_l = P`.
//!
//! `P_0` is the integer bounding box. At each level the current polytope is
//! sampled and original constraints are appended in index order while the
//! sampled fraction kept stays above `r_max`. A constraint that would cut
//! below `r_min` is replaced by a relaxed cut `a'·x ≤ b'` whose sampled
//! fraction lands in `[r_min, r_max]`; `a'` is the original normal first and a
//! randomly disturbed one afterwards.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::RunConfig;
use crate::lp::{self, LpStatus, Rectangle};
use crate::model::{Halfspace, LatticePoint, Polytope};
use crate::rng::{Domain, Rng};
use crate::sampler::{self, SampleSet, ShiftedPolytope};

#[derive(Clone, Debug)]
pub struct ChainLevel {
    pub polytope: Polytope,
    /// Rows appended to the previous level's polytope to obtain this one.
    pub cut_rows: Vec<Halfspace>,
    /// Samples of this level's polytope used to choose the next cuts
    /// (empty on the last level).
    pub samples: SampleSet,
    /// Sampling setup for this level (absent on the last level).
    pub shifted: Option<ShiftedPolytope>,
    /// Disturb rounds spent choosing the next level's relaxed cut.
    pub disturbs: usize,
}

#[derive(Clone, Debug)]
pub struct Chain {
    pub rect: Rectangle,
    pub levels: Vec<ChainLevel>,
}

impl Chain {
    /// Index `l` of the last level.
    pub fn length(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn last(&self) -> &Polytope {
        &self.levels[self.length()].polytope
    }

    /// Does `p` (a point of level `i`) belong to level `i + 1`?
    pub fn in_next(&self, i: usize, p: &LatticePoint) -> bool {
        self.levels[i + 1]
            .cut_rows
            .iter()
            .all(|r| r.admits_lattice(p))
    }

    pub fn total_disturbs(&self) -> usize {
        self.levels.iter().map(|l| l.disturbs).sum()
    }

    pub fn weak_rounding(&self) -> bool {
        self.levels
            .iter()
            .filter_map(|l| l.shifted.as_ref())
            .any(|s| s.weak_rounding)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSummary {
    pub length: usize,
    pub rows_per_level: Vec<usize>,
    pub disturbs: usize,
}

impl From<&Chain> for ChainSummary {
    fn from(c: &Chain) -> Self {
        ChainSummary {
            length: c.length(),
            rows_per_level: c.levels.iter().map(|l| l.cut_rows.len()).collect(),
            disturbs: c.total_disturbs(),
        }
    }
}

/// `64 + 2·log2 |P_0 ∩ Zⁿ|`, rounded up.
pub fn length_cap(rect: &Rectangle) -> usize {
    let bits = rect.lattice_count().bits() as usize;
    64 + 2 * bits
}

/// Counts values of `d` at most `b`, tolerating the same band as lattice membership.
fn count_at_most(sorted: &[f64], b: f64) -> usize {
    let limit = b + crate::model::MEMBERSHIP_TOL * (1.0 + b.abs());
    sorted.partition_point(|&v| v <= limit)
}

/// Smallest `b' ≥ b` with at least a `r_min` fraction of `total` values at
/// most `b'`; `None` when that fraction then exceeds `r_max`.
/// Returns the number of comparisons the sort used alongside.
pub fn threshold_from_values(
    values: &mut [f64],
    total: usize,
    b: f64,
    r_min: f64,
    r_max: f64,
) -> (Option<f64>, usize) {
    let mut comparisons = 0usize;
    values.sort_unstable_by(|x, y| {
        comparisons += 1;
        x.total_cmp(y)
    });
    if total == 0 {
        return (None, comparisons);
    }
    let need = (r_min * total as f64 - 1e-9).ceil().max(0.0) as usize;
    if need > values.len() {
        return (None, comparisons);
    }
    let candidate = if need == 0 {
        b
    } else {
        values[need - 1].max(b)
    };
    let kept = count_at_most(values, candidate);
    let frac = kept as f64 / total as f64;
    if frac >= r_min - 1e-12 && frac <= r_max + 1e-12 {
        (Some(candidate), comparisons)
    } else {
        (None, comparisons)
    }
}

/// Threshold search over the samples that satisfy every `active` row.
pub fn find_threshold(
    samples: &[LatticePoint],
    active: &[Halfspace],
    a: &[f64],
    b: f64,
    r_min: f64,
    r_max: f64,
) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let probe = Halfspace::new(a.to_vec(), 0.0);
    let mut values: Vec<f64> = samples
        .iter()
        .filter(|p| active.iter().all(|r| r.admits_lattice(p)))
        .map(|p| probe.dot_lattice(p))
        .collect();
    threshold_from_values(&mut values, samples.len(), b, r_min, r_max).0
}

/// Each coordinate uniform in `[a_i - μ, a_i + μ]`.
pub fn disturb(a: &[f64], mu: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::Precondition("disturb width must be positive".into()));
    }
    for _ in 0..2 {
        let out: Vec<f64> = a.iter().map(|&v| rng.uniform(v - mu, v + mu)).collect();
        if out.iter().any(|&v| v != 0.0) {
            return Ok(out);
        }
    }
    Err(Error::Precondition(
        "disturbed coefficient vector is zero after redraw".into(),
    ))
}

pub fn subdivision(p: &Polytope, cfg: &RunConfig) -> Result<Chain> {
    cfg.validate()?;
    let s = cfg.s;
    let w = cfg.walk_len(p.dim());
    let rect = lp::get_rect(p)?;
    let cap = length_cap(&rect);
    let origin = vec![0.0; p.dim()];
    let m = p.num_rows();

    let mut levels = vec![ChainLevel {
        polytope: rect.to_polytope(),
        cut_rows: Vec::new(),
        samples: SampleSet::default(),
        shifted: None,
        disturbs: 0,
    }];
    let mut j = 0;
    while j < m {
        let i = levels.len() - 1;
        if i >= cap {
            return Err(Error::ChainTooLong { length: i + 1, cap });
        }
        let current = levels[i].polytope.clone();
        let sp = sampler::shift_facets(&current)?;
        let mut rng = Rng::derive(cfg.seed, Domain::Chain, i as u64, 0);
        let samples =
            sampler::sample_lattice_capped(&sp, s, w, &mut rng, &origin, cfg.attempt_cap(s))?;
        let total = samples.len() as f64;

        let mut in_h = vec![true; samples.len()];
        let mut cuts: Vec<Halfspace> = Vec::new();
        let kept_with = |row: &Halfspace, in_h: &[bool]| {
            samples
                .points
                .iter()
                .zip(in_h)
                .filter(|(q, &inside)| inside && row.admits_lattice(q))
                .count() as f64
                / total
        };
        let restrict = |row: &Halfspace, in_h: &mut [bool]| {
            for (flag, q) in in_h.iter_mut().zip(&samples.points) {
                *flag = *flag && row.admits_lattice(q);
            }
        };

        while j < m && kept_with(p.row(j), &in_h) > cfg.r_max {
            restrict(p.row(j), &mut in_h);
            cuts.push(p.row(j).clone());
            j += 1;
        }

        let mut disturbs = 0;
        if j < m {
            let row = p.row(j);
            if kept_with(row, &in_h) >= cfg.r_min {
                cuts.push(row.clone());
                j += 1;
            } else {
                let mut drng = Rng::derive(cfg.seed, Domain::Disturb, i as u64, 0);
                let cut = loop {
                    let (normal, floor) = if disturbs == 0 {
                        (row.a.clone(), row.b)
                    } else {
                        let normal = disturb(&row.a, cfg.mu, &mut drng)?;
                        // keep P inside the relaxed cut
                        let res = lp::maximize(&normal, p)?;
                        let floor = match res.status {
                            LpStatus::Optimal => row.b.max(res.value),
                            LpStatus::Infeasible => return Err(Error::Infeasible),
                            LpStatus::Unbounded => {
                                return Err(Error::Unbounded {
                                    direction: "disturbed cut normal".into(),
                                })
                            }
                        };
                        (normal, floor)
                    };
                    let probe = Halfspace::new(normal.clone(), 0.0);
                    let mut values: Vec<f64> = samples
                        .points
                        .iter()
                        .zip(&in_h)
                        .filter(|(_, &inside)| inside)
                        .map(|(q, _)| probe.dot_lattice(q))
                        .collect();
                    let (found, _) = threshold_from_values(
                        &mut values,
                        samples.len(),
                        floor,
                        cfg.r_min,
                        cfg.r_max,
                    );
                    if let Some(b) = found {
                        break Halfspace::new(normal, b);
                    }
                    disturbs += 1;
                    if disturbs > cfg.max_disturbs {
                        return Err(Error::DisturbCap {
                            level: i,
                            rounds: cfg.max_disturbs,
                        });
                    }
                };
                cuts.push(cut);
            }
        }

        let next = current.with_rows(&cuts);
        let level = &mut levels[i];
        level.samples = samples;
        level.shifted = Some(sp);
        level.disturbs = disturbs;
        levels.push(ChainLevel {
            polytope: next,
            cut_rows: cuts,
            samples: SampleSet::default(),
            shifted: None,
            disturbs: 0,
        });
    }
    Ok(Chain { rect, levels })
}
