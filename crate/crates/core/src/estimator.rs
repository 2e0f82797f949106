//! The outer counting loop: per-level ratio statistics, grouped variance
//! and the variance-based stopping rule.
//!
//! With `R_i` the sampled ratio of level `i`, the product `R = ∏ R_i` has
//! `Var(R) = ∏(Var R_i + E[R_i]²) − ∏ E[R_i]²` for independent levels.
//! Sampling stops once `∏(v_i + r_i²) − r² ≤ δ·ε²·r²`, which by Chebyshev
//! bounds the relative error by `ε` with probability at least `1 − δ`.

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{self, Chain, ChainSummary};
use crate::error::{Error, Result};
use crate::model::{LatticePoint, Polytope};
use crate::rng::{Domain, Rng};
use crate::sampler::{self, SampleSet};

/// Above this many levels the stopping products are accumulated in log space.
const LOG_SPACE_LEVELS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Samples per level per round.
    pub s: usize,
    /// Groups added per round.
    pub gamma: usize,
    /// Hit-and-run steps per attempt; `None` means the dimension `n`.
    pub w: Option<usize>,
    pub r_min: f64,
    pub r_max: f64,
    pub mu: f64,
    pub seed: u64,
    pub max_rounds: usize,
    /// Rejection cap per sampling call; `None` means `max(10⁵, 10⁴·s)`.
    pub max_attempts: Option<u64>,
    pub max_disturbs: usize,
    /// Worker threads for per-level sampling; results do not depend on it.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::with_bounds(0.2, 0.1)
    }
}

/// `2/(δ·ε²)` rounded up to a multiple of `γ`.
pub fn default_sample_size(epsilon: f64, delta: f64, gamma: usize) -> usize {
    let raw = (2.0 / (delta * epsilon * epsilon) - 1e-9).ceil().max(1.0) as usize;
    raw.div_ceil(gamma) * gamma
}

impl RunConfig {
    pub fn with_bounds(epsilon: f64, delta: f64) -> Self {
        let gamma = 10;
        RunConfig {
            epsilon,
            delta,
            s: default_sample_size(epsilon, delta, gamma),
            gamma,
            w: None,
            r_min: 0.4,
            r_max: 0.6,
            mu: 0.005,
            seed: 0,
            max_rounds: 2000,
            max_attempts: None,
            max_disturbs: 100,
            threads: 1,
        }
    }

    pub fn walk_len(&self, n: usize) -> usize {
        self.w.unwrap_or(n)
    }

    pub fn attempt_cap(&self, s: usize) -> u64 {
        self.max_attempts
            .unwrap_or_else(|| sampler::rejection_cap(s))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.gamma < 2 {
            return bad(format!("gamma must be at least 2, got {}", self.gamma));
        }
        if self.s == 0 || !self.s.is_multiple_of(self.gamma) {
            return bad(format!(
                "s = {} must be a positive multiple of gamma = {}",
                self.s, self.gamma
            ));
        }
        if !(self.r_min > 0.0 && self.r_min < 0.5 && self.r_max > 0.5 && self.r_max < 1.0) {
            return bad(format!(
                "need 0 < r_min < 0.5 < r_max < 1, got [{}, {}]",
                self.r_min, self.r_max
            ));
        }
        if self.mu.is_nan() || self.mu <= 0.0 {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if self.w == Some(0) {
            return bad("walk length must be at least 1".into());
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub r: f64,
    pub v: f64,
    pub group_ratios: Vec<f64>,
    pub n_groups: usize,
}

/// Ratio statistics from per-sample membership flags in arrival order.
pub fn ratio_stats_from_flags(inside: &[bool], n_groups: usize) -> Result<RatioStats> {
    if n_groups < 2 {
        return Err(Error::Precondition("need at least two groups".into()));
    }
    if inside.is_empty() || !inside.len().is_multiple_of(n_groups) {
        return Err(Error::Precondition(format!(
            "{} samples cannot be split into {} equal groups",
            inside.len(),
            n_groups
        )));
    }
    let size = inside.len() / n_groups;
    let frac = |chunk: &[bool]| chunk.iter().filter(|&&b| b).count() as f64 / chunk.len() as f64;
    let r = frac(inside);
    let group_ratios: Vec<f64> = inside.chunks(size).map(frac).collect();
    let nf = n_groups as f64;
    let v = group_ratios.iter().map(|g| (g - r).powi(2)).sum::<f64>() / (nf * (nf - 1.0));
    Ok(RatioStats {
        r,
        v,
        group_ratios,
        n_groups,
    })
}

pub fn ratio_stats(
    samples: &[LatticePoint],
    next: &Polytope,
    n_groups: usize,
) -> Result<RatioStats> {
    let flags = samples
        .iter()
        .map(|p| next.contains_lattice(p))
        .collect::<Result<Vec<bool>>>()?;
    ratio_stats_from_flags(&flags, n_groups)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StopCheck {
    pub stop: bool,
    pub r: f64,
    pub v: f64,
}

/// Evaluates `∏(v_i + r_i²) − r² ≤ δ·ε²·r²`. Any zero ratio vetoes stopping.
pub fn stopping_satisfied(levels: &[RatioStats], epsilon: f64, delta: f64) -> StopCheck {
    let bound_factor = delta * epsilon * epsilon;
    if levels.iter().any(|s| s.r <= 0.0) {
        return StopCheck {
            stop: false,
            r: 0.0,
            v: 0.0,
        };
    }
    if levels.len() <= LOG_SPACE_LEVELS {
        let r: f64 = levels.iter().map(|s| s.r).product();
        let second: f64 = levels.iter().map(|s| s.v + s.r * s.r).product();
        let v = second - r * r;
        let r2 = r * r;
        StopCheck {
            stop: v <= bound_factor * r2 + 1e-12 * r2,
            r,
            v,
        }
    } else {
        let log_r: f64 = levels.iter().map(|s| s.r.ln()).sum();
        // ∏(v_i + r_i²) / r² − 1
        let rel = levels
            .iter()
            .map(|s| (s.v / (s.r * s.r)).ln_1p())
            .sum::<f64>()
            .exp_m1();
        let r = log_r.exp();
        StopCheck {
            stop: rel <= bound_factor + 1e-12,
            r,
            v: rel * r * r,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    /// Accepted / attempted walk endpoints per level over the counting rounds.
    pub acceptance_rates: Vec<f64>,
    pub weak_rounding: bool,
    pub disturbs: usize,
    pub fresh_samples: u64,
    pub reused_samples: u64,
    pub group_size: usize,
    pub chain: ChainSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountEstimate {
    pub estimate: f64,
    pub r: f64,
    pub v: f64,
    /// `|P_0 ∩ Zⁿ|` in decimal.
    pub rect_count: String,
    pub chain_length: usize,
    pub levels: Vec<RatioStats>,
    pub rounds: usize,
    pub total_samples: u64,
    pub diagnostics: Diagnostics,
}

struct LevelState {
    inside: Vec<bool>,
    attempts: u64,
    accepted: u64,
}

/// Draws this round's batch for one level: up to `want` fresh samples from
/// the transformed origin on the level's own stream, plus bookkeeping to
/// recover the prefix a sequential run would have drawn.
fn draw(
    chain: &Chain,
    cfg: &RunConfig,
    level: usize,
    round: usize,
    want: usize,
) -> Result<SampleSet> {
    let sp = chain.levels[level]
        .shifted
        .as_ref()
        .expect("every non-final level carries its sampler");
    let n = chain.rect.dim();
    let mut rng = Rng::derive(cfg.seed, Domain::Estimate, level as u64, round as u64);
    sampler::sample_lattice_capped(
        sp,
        want,
        cfg.walk_len(n),
        &mut rng,
        &vec![0.0; n],
        cfg.attempt_cap(want),
    )
}

pub fn estimate(p: &Polytope, cfg: &RunConfig) -> Result<CountEstimate> {
    cfg.validate()?;
    let chain = chain::subdivision(p, cfg)?;
    estimate_on_chain(&chain, cfg)
}

pub fn estimate_on_chain(chain: &Chain, cfg: &RunConfig) -> Result<CountEstimate> {
    cfg.validate()?;
    let l = chain.length();
    let s = cfg.s;
    let mut states: Vec<LevelState> = (0..l)
        .map(|_| LevelState {
            inside: Vec::new(),
            attempts: 0,
            accepted: 0,
        })
        .collect();
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };

    let mut n_groups = 0;
    let mut fresh_total = 0u64;
    let mut reused_total = 0u64;
    let mut round = 0;
    loop {
        if round >= cfg.max_rounds {
            return Err(Error::MaxRounds { rounds: round });
        }
        n_groups += cfg.gamma;

        // Parallel mode draws a full batch per level up front and keeps the
        // prefix the sequential schedule would have drawn.
        let speculative: Option<Vec<SampleSet>> = match &pool {
            Some(pool) => Some(pool.install(|| {
                (0..l)
                    .into_par_iter()
                    .map(|i| draw(chain, cfg, i, round, s))
                    .collect::<Result<Vec<_>>>()
            })?),
            None => None,
        };

        let mut carry: Vec<LatticePoint> = Vec::new();
        for (i, state) in states.iter_mut().enumerate() {
            let need = s - carry.len();
            reused_total += carry.len() as u64;
            let mut batch = std::mem::take(&mut carry);
            if need > 0 {
                let fresh = match &speculative {
                    Some(sets) => sets[i].prefix(need),
                    None => draw(chain, cfg, i, round, need)?,
                };
                state.attempts += fresh.attempts;
                state.accepted += fresh.len() as u64;
                fresh_total += fresh.len() as u64;
                batch.extend(fresh.points);
            }
            for q in batch {
                let inside = chain.in_next(i, &q);
                state.inside.push(inside);
                if inside && i + 1 < l {
                    carry.push(q);
                }
            }
        }
        round += 1;

        let stats = states
            .iter()
            .map(|st| ratio_stats_from_flags(&st.inside, n_groups))
            .collect::<Result<Vec<_>>>()?;
        let check = stopping_satisfied(&stats, cfg.epsilon, cfg.delta);
        if check.stop {
            let rect_count = chain.rect.lattice_count();
            let estimate = rect_count.to_f64().unwrap_or(f64::INFINITY) * check.r;
            let total_samples = states.iter().map(|st| st.inside.len() as u64).sum();
            return Ok(CountEstimate {
                estimate,
                r: check.r,
                v: check.v,
                rect_count: rect_count.to_string(),
                chain_length: l,
                levels: stats,
                rounds: round,
                total_samples,
                diagnostics: Diagnostics {
                    acceptance_rates: states
                        .iter()
                        .map(|st| {
                            if st.attempts == 0 {
                                1.0
                            } else {
                                st.accepted as f64 / st.attempts as f64
                            }
                        })
                        .collect(),
                    weak_rounding: chain.weak_rounding(),
                    disturbs: chain.total_disturbs(),
                    fresh_samples: fresh_total,
                    reused_samples: reused_total,
                    group_size: s / cfg.gamma,
                    chain: ChainSummary::from(chain),
                },
            });
        }
    }
}
