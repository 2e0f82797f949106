//! Benchmark families and the relative-error experiment harness.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{self, RunConfig};
use crate::lp;
use crate::model::{round_real, Halfspace, Polytope};
use crate::oracle;
use crate::rng::{Domain, Rng};

pub const MAX_REDRAWS: usize = 100;
/// Half-length of the long axis of the thin rectangle family.
pub const THIN_LONG_AXIS: f64 = 1000.0;
/// Box sizes up to this are checked for a lattice point by enumeration.
const SMALL_BOX: u64 = 1_000_000;

#[derive(Clone, Debug)]
pub struct Generated {
    pub polytope: Polytope,
    /// Rejected draws before this one.
    pub redraws: usize,
}

/// `m` rows with integer `a_ij ∈ [−10, 10]`, `b_i ∈ [−λ, λ]`, followed by the
/// box `−λ ≤ x_i ≤ λ`. Draws are repeated until the body holds a lattice point.
pub fn gen_random(m: usize, n: usize, lambda: i64, rng: &mut Rng) -> Result<Polytope> {
    gen_random_counted(m, n, lambda, rng).map(|g| g.polytope)
}

pub fn gen_random_counted(m: usize, n: usize, lambda: i64, rng: &mut Rng) -> Result<Generated> {
    if m == 0 || n == 0 || lambda < 1 {
        return Err(Error::Precondition(format!(
            "need m, n, lambda ≥ 1, got m={m} n={n} lambda={lambda}"
        )));
    }
    for redraws in 0..MAX_REDRAWS {
        let mut rows = Vec::with_capacity(m + 2 * n);
        while rows.len() < m {
            let a: Vec<f64> = (0..n).map(|_| rng.int_in(-10, 10) as f64).collect();
            let b = rng.int_in(-lambda, lambda) as f64;
            // An all-zero row is either vacuous or infeasible; draw it again.
            if a.iter().any(|&x| x != 0.0) {
                rows.push(Halfspace::new(a, b));
            }
        }
        rows.extend(box_rows(n, lambda as f64));
        let p = Polytope::new(n, rows)?;
        if has_lattice_point(&p)? {
            return Ok(Generated {
                polytope: p,
                redraws,
            });
        }
    }
    Err(Error::GeneratorExhausted { tries: MAX_REDRAWS })
}

fn box_rows(n: usize, h: f64) -> Vec<Halfspace> {
    let mut rows = Vec::with_capacity(2 * n);
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        rows.push(Halfspace::new(a.clone(), h));
        a[j] = -1.0;
        rows.push(Halfspace::new(a, h));
    }
    rows
}

fn has_lattice_point(p: &Polytope) -> Result<bool> {
    let (center, radius) = match lp::chebyshev_center(p) {
        Ok(c) => c,
        Err(Error::Infeasible) => return Ok(false),
        Err(e) => return Err(e),
    };
    if radius < 0.0 {
        return Ok(false);
    }
    if p.contains_lattice(&round_real(&center))? {
        return Ok(true);
    }
    match oracle::exact_count(p, &BigUint::from(SMALL_BOX), false) {
        Ok(r) => Ok(r.count > BigUint::from(0u8)),
        // No witness and too large to enumerate: redraw.
        Err(Error::OracleLimit { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Haar-random orthogonal matrix: QR of a Gaussian matrix with the signs of
/// `R`'s diagonal moved into `Q`.
pub fn random_rotation(n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `{−1000 ≤ y_1 ≤ 1000, −τ ≤ y_i ≤ τ}` mapped by a random rotation `x = Q y`,
/// or left axis-aligned when `rotate` is false.
pub fn gen_thin_rect(n: usize, tau: f64, rng: &mut Rng, rotate: bool) -> Result<Polytope> {
    if n < 2 || tau.is_nan() || tau <= 0.0 {
        return Err(Error::Precondition(format!(
            "need n ≥ 2 and tau > 0, got n={n} tau={tau}"
        )));
    }
    let q = if rotate {
        random_rotation(n, rng)
    } else {
        DMatrix::identity(n, n)
    };
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let h = if i == 0 { THIN_LONG_AXIS } else { tau };
        // y_i = (Qᵀ x)_i = column i of Q dotted with x
        let a: Vec<f64> = q.column(i).iter().copied().collect();
        rows.push(Halfspace::new(a.clone(), h));
        rows.push(Halfspace::new(a.iter().map(|v| -v).collect(), h));
    }
    Polytope::new(n, rows)
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub id: String,
    /// Generator seed, echoed in reports.
    pub seed: u64,
    pub polytope: Polytope,
    pub exact: BigUint,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub seed: u64,
    pub run_idx: usize,
    pub exact_count: String,
    pub estimate: f64,
    /// `|estimate − exact| / exact`.
    pub rel_error: f64,
    pub within_bound: bool,
    pub rounds: usize,
    pub total_samples: u64,
    pub chain_length: usize,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceSummary {
    pub instance_id: String,
    pub runs: usize,
    pub within: usize,
    pub frequency: f64,
    pub mean_chain_length: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BenchReport {
    pub epsilon: f64,
    pub delta: f64,
    pub runs: Vec<RunRecord>,
    pub instances: Vec<InstanceSummary>,
    /// Fraction of all runs within the bound; 1 for an empty report.
    pub frequency: f64,
    pub wall_ms: u64,
}

/// Seed of run `r` on instance `i`.
pub fn run_seed(base: u64, instance: usize, run: usize) -> u64 {
    Rng::derive(base, Domain::Generator, instance as u64, run as u64).next_u64()
}

pub fn bound_experiment(
    instances: &[Instance],
    cfg: &RunConfig,
    repeats: usize,
) -> Result<BenchReport> {
    cfg.validate()?;
    let start = Instant::now();
    let per_instance: Vec<Vec<RunRecord>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let exact = inst.exact.to_f64().unwrap_or(f64::INFINITY);
            (0..repeats)
                .map(|r| {
                    let run_cfg = RunConfig {
                        seed: run_seed(cfg.seed, i, r),
                        ..cfg.clone()
                    };
                    let t = Instant::now();
                    let est = estimator::estimate(&inst.polytope, &run_cfg)?;
                    let rel_error = (est.estimate - exact).abs() / exact;
                    Ok(RunRecord {
                        instance_id: inst.id.clone(),
                        seed: run_cfg.seed,
                        run_idx: r,
                        exact_count: inst.exact.to_string(),
                        estimate: est.estimate,
                        rel_error,
                        within_bound: rel_error <= cfg.epsilon,
                        rounds: est.rounds,
                        total_samples: est.total_samples,
                        chain_length: est.chain_length,
                        wall_ms: t.elapsed().as_millis() as u64,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = BenchReport {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        ..BenchReport::default()
    };
    for (inst, runs) in instances.iter().zip(&per_instance) {
        if runs.is_empty() {
            continue;
        }
        let within = runs.iter().filter(|r| r.within_bound).count();
        report.instances.push(InstanceSummary {
            instance_id: inst.id.clone(),
            runs: runs.len(),
            within,
            frequency: within as f64 / runs.len() as f64,
            mean_chain_length: runs.iter().map(|r| r.chain_length as f64).sum::<f64>()
                / runs.len() as f64,
        });
    }
    report.runs = per_instance.into_iter().flatten().collect();
    let within = report.runs.iter().filter(|r| r.within_bound).count();
    report.frequency = if report.runs.is_empty() {
        1.0
    } else {
        within as f64 / report.runs.len() as f64
    };
    report.wall_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if self.runs.is_empty() {
            out.write_record([
                "instance_id",
                "seed",
                "run_idx",
                "exact_count",
                "estimate",
                "rel_error",
                "within_bound",
                "rounds",
                "total_samples",
                "chain_length",
                "wall_ms",
            ])
            .map_err(csv_err)?;
        }
        for r in &self.runs {
            out.serialize(r).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Random instances are redrawn until their exact count is at most this.
pub const SUITE_MAX_COUNT: u64 = 1_000_000;
/// Oracle box limit for suite instances; rotated thin bodies have boxes far
/// larger than their point count, which projection pruning handles.
pub const SUITE_ORACLE_LIMIT: u64 = 1 << 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Random,
    ThinRect,
    Standard,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Family::Random),
            "thinrect" | "thin-rect" => Ok(Family::ThinRect),
            "standard" | "suite" => Ok(Family::Standard),
            _ => Err(Error::InvalidConfig(format!(
                "unknown family '{s}' (expected random, thinrect or standard)"
            ))),
        }
    }
}

fn exact(p: &Polytope) -> Result<BigUint> {
    Ok(oracle::exact_count(p, &BigUint::from(SUITE_ORACLE_LIMIT), false)?.count)
}

/// Rotated thin rectangles for `n ∈ {3, 4}` and `τ ∈ {1, 2, 3}`.
pub fn thin_rect_suite(seed: u64) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for n in [3usize, 4] {
        for tau in [1u32, 2, 3] {
            let inst_seed = seed.wrapping_add((n * 10 + tau as usize) as u64);
            let mut rng = Rng::derive(inst_seed, Domain::Generator, 1, 0);
            let p = gen_thin_rect(n, tau as f64, &mut rng, true)?;
            out.push(Instance {
                id: format!("thin-n{n}-t{tau}"),
                seed: inst_seed,
                exact: exact(&p)?,
                polytope: p,
            });
        }
    }
    Ok(out)
}

/// Random bodies for `n ∈ {3..6}`, `λ ∈ {2, 4, 8}`, `m ∈ {⌈n/2⌉, n}`, each
/// with between 1 and 10⁶ lattice points.
pub fn random_suite(seed: u64) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for n in 3usize..=6 {
        for lambda in [2i64, 4, 8] {
            for m in [n.div_ceil(2), n] {
                out.push(random_instance(seed, m, n, lambda)?);
            }
        }
    }
    Ok(out)
}

/// First random `(m, n, λ)` instance from `seed` upward whose exact count
/// lies in `[1, 10⁶]`.
pub fn random_instance(seed: u64, m: usize, n: usize, lambda: i64) -> Result<Instance> {
    for k in 0..MAX_REDRAWS as u64 {
        let inst_seed = seed.wrapping_add(k);
        let mut rng = Rng::derive(
            inst_seed,
            Domain::Generator,
            0,
            ((m << 16) | (n << 8)) as u64 | lambda as u64,
        );
        let p = gen_random(m, n, lambda, &mut rng)?;
        let c = exact(&p)?;
        if c >= BigUint::from(1u8) && c <= BigUint::from(SUITE_MAX_COUNT) {
            return Ok(Instance {
                id: format!("rand-m{m}-n{n}-l{lambda}"),
                seed: inst_seed,
                polytope: p,
                exact: c,
            });
        }
    }
    Err(Error::GeneratorExhausted { tries: MAX_REDRAWS })
}

/// The 30-instance suite: 6 thin rectangles and 24 random bodies.
pub fn standard_suite(seed: u64) -> Result<Vec<Instance>> {
    let mut v = thin_rect_suite(seed)?;
    v.extend(random_suite(seed)?);
    Ok(v)
}

pub fn family_suite(family: Family, seed: u64) -> Result<Vec<Instance>> {
    match family {
        Family::Random => random_suite(seed),
        Family::ThinRect => thin_rect_suite(seed),
        Family::Standard => standard_suite(seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_respect_ranges() {
        let mut rng = Rng::new(1, 0);
        for _ in 0..20 {
            let g = gen_random_counted(4, 3, 5, &mut rng).unwrap();
            let p = &g.polytope;
            assert_eq!(p.num_rows(), 4 + 6);
            for row in &p.rows()[..4] {
                assert!(row
                    .a
                    .iter()
                    .all(|&a| a.fract() == 0.0 && (-10.0..=10.0).contains(&a)));
                assert!(row.a.iter().any(|&a| a != 0.0));
                assert!(row.b.fract() == 0.0 && (-5.0..=5.0).contains(&row.b));
            }
            let (lo, hi) = lp::real_bounds(p).unwrap();
            assert!(lo.iter().all(|&l| l >= -5.0 - 1e-9));
            assert!(hi.iter().all(|&h| h <= 5.0 + 1e-9));
            let c = oracle::exact_count(p, &BigUint::from(10_000u32), false).unwrap();
            assert!(c.count > BigUint::from(0u8));
        }
    }

    #[test]
    fn lambda_one_keeps_unit_range() {
        let mut rng = Rng::new(2, 0);
        let p = gen_random(2, 4, 1, &mut rng).unwrap();
        let r = oracle::exact_count(&p, &BigUint::from(1000u32), true).unwrap();
        for q in r.points.unwrap() {
            assert!(q.0.iter().all(|x| (-1..=1).contains(x)));
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let a = gen_random(5, 5, 8, &mut Rng::new(1, 0)).unwrap();
        let b = gen_random(5, 5, 8, &mut Rng::new(1, 0)).unwrap();
        assert_eq!(a, b);
        let a = gen_thin_rect(3, 2.0, &mut Rng::new(1, 0), true).unwrap();
        let b = gen_thin_rect(3, 2.0, &mut Rng::new(1, 0), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_generator_arguments() {
        let mut rng = Rng::new(0, 0);
        assert!(gen_random(0, 3, 2, &mut rng).is_err());
        assert!(gen_random(2, 3, 0, &mut rng).is_err());
        assert!(gen_thin_rect(1, 2.0, &mut rng, true).is_err());
        assert!(gen_thin_rect(3, 0.0, &mut rng, true).is_err());
    }

    #[test]
    fn rotations_are_orthogonal() {
        let mut rng = Rng::new(3, 0);
        for n in 2..8 {
            let q = random_rotation(n, &mut rng);
            let e = &q.transpose() * &q - DMatrix::<f64>::identity(n, n);
            assert!(e.amax() <= 1e-10);
        }
    }

    #[test]
    fn axis_aligned_thin_rect_count() {
        for n in 2..=3 {
            let p = gen_thin_rect(n, 3.0, &mut Rng::new(0, 0), false).unwrap();
            let c = oracle::exact_count(&p, &BigUint::from(10_000_000u32), false).unwrap();
            assert_eq!(c.count, BigUint::from(2001u64 * 7u64.pow(n as u32 - 1)));
        }
        let p = gen_thin_rect(2, 2.5, &mut Rng::new(0, 0), false).unwrap();
        let c = oracle::exact_count(&p, &BigUint::from(10_000_000u32), false).unwrap();
        assert_eq!(c.count, BigUint::from(2001u64 * 5));
    }

    #[test]
    fn rotated_thin_rect_count_is_near_volume() {
        let p = gen_thin_rect(3, 2.0, &mut Rng::new(5, 0), true).unwrap();
        let c = exact(&p).unwrap().to_f64().unwrap();
        let vol = 2000.0 * 16.0;
        assert!((c / vol - 1.0).abs() < 0.1, "{c}");
    }

    #[test]
    fn empty_experiment() {
        let p = Polytope::from_box(&[0.0, 0.0], &[2.0, 2.0]).unwrap();
        let inst = Instance {
            id: "b".into(),
            seed: 0,
            polytope: p,
            exact: BigUint::from(9u8),
        };
        let r = bound_experiment(&[inst], &RunConfig::default(), 0).unwrap();
        assert!(r.runs.is_empty() && r.instances.is_empty());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            "instance_id,seed,run_idx,exact_count,estimate,rel_error,within_bound,rounds,total_samples,chain_length,wall_ms"
        );
    }

    #[test]
    fn small_experiment_reports_every_run() {
        let tri = Polytope::new(
            2,
            vec![
                Halfspace::new(vec![-1.0, 0.0], 0.0),
                Halfspace::new(vec![0.0, -1.0], 0.0),
                Halfspace::new(vec![1.0, 1.0], 5.0),
            ],
        )
        .unwrap();
        let inst = Instance {
            id: "tri".into(),
            seed: 0,
            polytope: tri,
            exact: BigUint::from(21u8),
        };
        let r = bound_experiment(&[inst], &RunConfig::with_bounds(0.5, 0.1), 3).unwrap();
        assert_eq!(r.runs.len(), 3);
        assert_eq!(r.instances[0].runs, 3);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
