//! Bitstring (1+1) EA on OneMax.
//!
//! Zeros play the role of pixels still showing the start image and ones the
//! pixels showing the target. The step rule mirrors the engine: propose a
//! set of flips, accept when the number of ones does not drop. In
//! [`Sampling::PerBit`] mode each bit takes one [`RngStream::unit`] draw in
//! index order, which reproduces the engine's draw sequence exactly on an
//! all-differing image. [`Sampling::Skip`] jumps between flipped positions
//! with geometric gaps; it has the same distribution but a different draw
//! sequence, and costs O(flips) per step instead of O(n).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, RngStream};

/// Runs are aborted after this many generations.
pub const SAFETY_CAP: u64 = 1_000_000_000;
pub const MIN_REPEATS: usize = 30;
/// Share of runs dropped from each end before averaging.
pub const TRIM_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LabOperator {
    Standard,
    Asymmetric { c_s: f64, c_t: f64 },
}

impl LabOperator {
    pub fn name(&self) -> &'static str {
        match self {
            LabOperator::Standard => "standard",
            LabOperator::Asymmetric { .. } => "asymmetric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    PerBit,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitInstance {
    bits: Vec<bool>,
    ones: usize,
    // positions holding 0 / 1, and each position's slot in its list
    zero_pos: Vec<usize>,
    one_pos: Vec<usize>,
    slot: Vec<usize>,
}

impl BitInstance {
    pub fn zeros(n: usize) -> Self {
        Self::with_zeros(n, n)
    }

    /// Length `n` with zeros at positions `0..k` and ones elsewhere.
    pub fn with_zeros(n: usize, k: usize) -> Self {
        assert!(k <= n);
        let bits: Vec<bool> = (0..n).map(|i| i >= k).collect();
        let zero_pos: Vec<usize> = (0..k).collect();
        let one_pos: Vec<usize> = (k..n).collect();
        let slot = (0..n).map(|i| if i < k { i } else { i - k }).collect();
        Self {
            bits,
            ones: n - k,
            zero_pos,
            one_pos,
            slot,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_optimal(&self) -> bool {
        self.ones == self.bits.len()
    }

    fn flip(&mut self, pos: usize) {
        let (from, to) = if self.bits[pos] {
            (&mut self.one_pos, &mut self.zero_pos)
        } else {
            (&mut self.zero_pos, &mut self.one_pos)
        };
        let s = self.slot[pos];
        from.swap_remove(s);
        if let Some(&moved) = from.get(s) {
            self.slot[moved] = s;
        }
        self.slot[pos] = to.len();
        to.push(pos);
        if self.bits[pos] {
            self.ones -= 1;
        } else {
            self.ones += 1;
        }
        self.bits[pos] = !self.bits[pos];
    }

    /// Positions to flip for one offspring.
    pub fn propose(&self, op: LabOperator, sampling: Sampling, rng: &mut RngStream) -> Vec<usize> {
        let n = self.bits.len();
        let zeros = n - self.ones;
        let mut out = Vec::new();
        match (op, sampling) {
            (LabOperator::Standard, Sampling::PerBit) => {
                let p = 1.0 / n as f64;
                for i in 0..n {
                    if rng.unit() < p {
                        out.push(i);
                    }
                }
            }
            (LabOperator::Asymmetric { c_s, c_t }, Sampling::PerBit) => {
                let p0 = rate(c_s, zeros);
                let p1 = rate(c_t, self.ones);
                for (i, &bit) in self.bits.iter().enumerate() {
                    let p = if bit { p1 } else { p0 };
                    if rng.unit() < p {
                        out.push(i);
                    }
                }
            }
            (LabOperator::Standard, Sampling::Skip) => {
                skip_select(n, 1.0 / n as f64, rng, |i| out.push(i));
            }
            (LabOperator::Asymmetric { c_s, c_t }, Sampling::Skip) => {
                skip_select(zeros, rate(c_s, zeros), rng, |i| out.push(self.zero_pos[i]));
                skip_select(self.ones, rate(c_t, self.ones), rng, |i| out.push(self.one_pos[i]));
            }
        }
        out
    }

    /// Change in the number of ones if `flips` were applied.
    pub fn gain(&self, flips: &[usize]) -> i64 {
        flips.iter().map(|&i| if self.bits[i] { -1 } else { 1 }).sum()
    }

    /// One (1+1) generation; returns whether the offspring was accepted.
    pub fn step(&mut self, op: LabOperator, sampling: Sampling, rng: &mut RngStream) -> bool {
        let flips = self.propose(op, sampling, rng);
        if self.gain(&flips) >= 0 {
            for i in flips {
                self.flip(i);
            }
            true
        } else {
            false
        }
    }
}

fn rate(c: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        (c / (2.0 * count as f64)).min(1.0)
    }
}

fn skip_select(len: usize, p: f64, rng: &mut RngStream, mut pick: impl FnMut(usize)) {
    if len == 0 || p <= 0.0 {
        return;
    }
    let mut pos = rng.geometric(p);
    while pos < len as u64 {
        pick(pos as usize);
        pos = pos.saturating_add(1).saturating_add(rng.geometric(p));
    }
}

/// Generations needed to go from all zeros to all ones.
pub fn run_to_optimum(n: usize, op: LabOperator, seed: u64, sampling: Sampling) -> Result<u64> {
    run_traced(n, op, seed, sampling, |_| {})
}

/// Same as [`run_to_optimum`], reporting each accept/reject decision.
pub fn run_traced(
    n: usize,
    op: LabOperator,
    seed: u64,
    sampling: Sampling,
    mut on_step: impl FnMut(bool),
) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidParameter("bitstring length must be >= 1".into()));
    }
    let mut inst = BitInstance::zeros(n);
    let mut rng = RngStream::new(seed);
    let mut generations = 0u64;
    while !inst.is_optimal() {
        if generations >= SAFETY_CAP {
            return Err(Error::InvalidParameter(format!(
                "{} on n = {n} did not reach the optimum within {SAFETY_CAP} generations (seed {seed})",
                op.name()
            )));
        }
        on_step(inst.step(op, sampling, &mut rng));
        generations += 1;
    }
    Ok(generations)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub n: usize,
    pub repeat: usize,
    pub seed: u64,
    pub generations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    /// Mean after dropping [`TRIM_FRACTION`] of runs from each end.
    pub trimmed_mean: f64,
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Linear,
    NLogN,
}

/// Least-squares fit of `mean(T) = coefficient * basis(n)` on relative residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: Model,
    pub coefficient: f64,
    /// Per-point `(observed - fitted) / observed`.
    pub residuals: Vec<f64>,
    pub rss: f64,
}

impl ModelFit {
    pub fn fit(model: Model, points: &[ScalingPoint]) -> Self {
        let basis = |n: usize| match model {
            Model::Linear => n as f64,
            Model::NLogN => n as f64 * (n as f64).ln(),
        };
        let (mut num, mut den) = (0.0, 0.0);
        for p in points {
            let r = basis(p.n) / p.trimmed_mean;
            num += r;
            den += r * r;
        }
        let coefficient = if den > 0.0 { num / den } else { 0.0 };
        let residuals: Vec<f64> = points
            .iter()
            .map(|p| (p.trimmed_mean - coefficient * basis(p.n)) / p.trimmed_mean)
            .collect();
        let rss = residuals.iter().map(|r| r * r).sum();
        Self {
            model,
            coefficient,
            residuals,
            rss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub operator: LabOperator,
    pub trials: Vec<Trial>,
    pub points: Vec<ScalingPoint>,
    /// `T(n[i+1]) / T(n[i])` on trimmed means.
    pub ratios: Vec<f64>,
    /// `None` with fewer than two sizes.
    pub fits: Option<(ModelFit, ModelFit)>,
}

impl ScalingResult {
    pub fn better_model(&self) -> Option<Model> {
        self.fits
            .as_ref()
            .map(|(lin, nln)| if nln.rss < lin.rss { Model::NLogN } else { Model::Linear })
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "operator,n,repeat,seed,generations")?;
        for t in &self.trials {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.operator.name(),
                t.n,
                t.repeat,
                t.seed,
                t.generations
            )?;
        }
        Ok(())
    }
}

/// Runs `repeats` independent trials per size. Trials run on the current
/// rayon pool; results are ordered by `(n, repeat)`.
pub fn scaling_experiment(
    op: LabOperator,
    n_list: &[usize],
    repeats: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<ScalingResult> {
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "n list must be non-empty, positive and strictly increasing".into(),
        ));
    }
    if repeats < MIN_REPEATS {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_REPEATS} repeats required, got {repeats}"
        )));
    }
    let jobs: Vec<(usize, usize)> = n_list
        .iter()
        .flat_map(|&n| (0..repeats).map(move |r| (n, r)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(n, repeat)| {
            let seed = derive_seed(seed, &[n as u64, repeat as u64]);
            run_to_optimum(n, op, seed, sampling).map(|generations| Trial {
                n,
                repeat,
                seed,
                generations,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<ScalingPoint> = trials
        .chunks(repeats)
        .map(|chunk| {
            let samples: Vec<f64> = chunk.iter().map(|t| t.generations as f64).collect();
            ScalingPoint {
                n: chunk[0].n,
                trimmed_mean: trimmed_mean(&samples, TRIM_FRACTION),
                mean: mean(&samples),
                std_dev: std_dev(&samples),
            }
        })
        .collect();
    let ratios = points
        .windows(2)
        .map(|w| w[1].trimmed_mean / w[0].trimmed_mean)
        .collect();
    let fits = (points.len() >= 2).then(|| (ModelFit::fit(Model::Linear, &points), ModelFit::fit(Model::NLogN, &points)));
    Ok(ScalingResult {
        operator: op,
        trials,
        points,
        ratios,
        fits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    /// Number of zeros in the sampled state.
    pub k: usize,
    pub mean_gain: f64,
    pub std_error: f64,
}

/// Mean one-step fitness gain (zero when rejected) from states with exactly
/// `k` zeros.
pub fn drift_experiment(
    n: usize,
    k_list: &[usize],
    op: LabOperator,
    samples: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<Vec<DriftPoint>> {
    if samples < 2 {
        return Err(Error::InvalidParameter("at least 2 samples required".into()));
    }
    if let Some(&k) = k_list.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::InvalidParameter(format!("k = {k} outside [1, {n}]")));
    }
    Ok(k_list
        .par_iter()
        .map(|&k| {
            let inst = BitInstance::with_zeros(n, k);
            let mut rng = RngStream::new(derive_seed(seed, &[k as u64]));
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..samples {
                let flips = inst.propose(op, sampling, &mut rng);
                let g = inst.gain(&flips).max(0) as f64;
                sum += g;
                sum_sq += g * g;
            }
            let m = sum / samples as f64;
            let var = (sum_sq - samples as f64 * m * m) / (samples as f64 - 1.0);
            DriftPoint {
                k,
                mean_gain: m,
                std_error: (var.max(0.0) / samples as f64).sqrt(),
            }
        })
        .collect())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Mean after dropping `floor(len * fraction)` samples from each end.
pub fn trimmed_mean(xs: &[f64], fraction: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut = (sorted.len() as f64 * fraction).floor() as usize;
    mean(&sorted[cut..sorted.len() - cut])
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASYM1: LabOperator = LabOperator::Asymmetric { c_s: 1.0, c_t: 1.0 };

    #[test]
    fn instance_bookkeeping() {
        let mut inst = BitInstance::with_zeros(10, 4);
        assert_eq!(inst.ones(), 6);
        for pos in [0, 9, 3, 0, 5] {
            inst.flip(pos);
            assert_eq!(inst.ones(), inst.bits().iter().filter(|b| **b).count());
            for (i, &b) in inst.bits().iter().enumerate() {
                let list = if b { &inst.one_pos } else { &inst.zero_pos };
                assert_eq!(list[inst.slot[i]], i);
            }
        }
    }

    #[test]
    fn standard_n1_takes_one_generation() {
        for seed in 0..20 {
            assert_eq!(run_to_optimum(1, LabOperator::Standard, seed, Sampling::PerBit).unwrap(), 1);
            assert_eq!(run_to_optimum(1, LabOperator::Standard, seed, Sampling::Skip).unwrap(), 1);
        }
    }

    #[test]
    fn asymmetric_n1_mean_two() {
        // geometric with success 1/2: sum_t t 2^-t = 2
        let exact: f64 = (1..200).map(|t| t as f64 * 0.5f64.powi(t)).sum();
        assert!((exact - 2.0).abs() < 1e-12);
        let runs = 20_000;
        let total: u64 = (0..runs)
            .map(|s| run_to_optimum(1, ASYM1, s, Sampling::PerBit).unwrap())
            .sum();
        let m = total as f64 / runs as f64;
        // sd of a geometric(1/2) is sqrt(2); 5 standard errors
        assert!((m - exact).abs() < 5.0 * (2.0f64).sqrt() / (runs as f64).sqrt(), "{m}");
    }

    #[test]
    fn runs_end_at_all_ones() {
        for sampling in [Sampling::PerBit, Sampling::Skip] {
            for op in [LabOperator::Standard, ASYM1] {
                let mut inst = BitInstance::zeros(64);
                let mut rng = RngStream::new(5);
                while !inst.is_optimal() {
                    let before = inst.ones();
                    inst.step(op, sampling, &mut rng);
                    assert!(inst.ones() >= before);
                }
                assert!(inst.bits().iter().all(|b| *b));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(run_to_optimum(0, ASYM1, 0, Sampling::PerBit).is_err());
        assert!(scaling_experiment(ASYM1, &[4, 2], 30, 0, Sampling::Skip).is_err());
        assert!(scaling_experiment(ASYM1, &[4, 8], 10, 0, Sampling::Skip).is_err());
        assert!(drift_experiment(10, &[0], ASYM1, 10, 0, Sampling::Skip).is_err());
        assert!(drift_experiment(10, &[11], ASYM1, 10, 0, Sampling::Skip).is_err());
    }

    #[test]
    fn single_size_has_no_ratio() {
        let r = scaling_experiment(ASYM1, &[1], 30, 0, Sampling::PerBit).unwrap();
        assert!(r.ratios.is_empty());
        assert!(r.fits.is_none());
        assert!(r.better_model().is_none());
        assert_eq!(r.trials.len(), 30);
    }

    #[test]
    fn scaling_is_seed_stable() {
        let a = scaling_experiment(LabOperator::Standard, &[16, 32], 30, 9, Sampling::Skip).unwrap();
        let b = scaling_experiment(LabOperator::Standard, &[16, 32], 30, 9, Sampling::Skip).unwrap();
        assert_eq!(a, b);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("operator,n,repeat,seed,generations\nstandard,16,0,"));
        assert_eq!(text.lines().count(), 61);
    }

    #[test]
    fn fits_recover_exact_models() {
        let pts = |f: &dyn Fn(f64) -> f64| -> Vec<ScalingPoint> {
            [64usize, 128, 256, 512]
                .iter()
                .map(|&n| ScalingPoint {
                    n,
                    trimmed_mean: f(n as f64),
                    mean: f(n as f64),
                    std_dev: 0.0,
                })
                .collect()
        };
        let lin = pts(&|n| 3.0 * n);
        let fit = ModelFit::fit(Model::Linear, &lin);
        assert!((fit.coefficient - 3.0).abs() < 1e-12 && fit.rss < 1e-20);
        assert!(ModelFit::fit(Model::NLogN, &lin).rss > fit.rss);

        let nln = pts(&|n| 2.5 * n * n.ln());
        let fit = ModelFit::fit(Model::NLogN, &nln);
        assert!((fit.coefficient - 2.5).abs() < 1e-12 && fit.rss < 1e-20);
    }

    #[test]
    fn trimmed_mean_drops_tails() {
        let xs: Vec<f64> = (1..=10).map(f64::from).chain([1000.0]).collect();
        // 11 samples: cut 1 from each end
        assert_eq!(trimmed_mean(&xs, 0.1), (2..=10).sum::<i32>() as f64 / 9.0);
    }

    /// Exact expected one-step gain by enumerating every flip subset.
    fn exact_drift(n: usize, k: usize, op: LabOperator) -> f64 {
        let ones = n - k;
        let (p0, p1) = match op {
            LabOperator::Standard => (1.0 / n as f64, 1.0 / n as f64),
            LabOperator::Asymmetric { c_s, c_t } => (
                if k == 0 { 0.0 } else { (c_s / (2.0 * k as f64)).min(1.0) },
                if ones == 0 { 0.0 } else { (c_t / (2.0 * ones as f64)).min(1.0) },
            ),
        };
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            let mut prob = 1.0;
            let mut gain = 0i64;
            for i in 0..n {
                let is_zero = i < k;
                let p = if is_zero { p0 } else { p1 };
                if mask & (1 << i) != 0 {
                    prob *= p;
                    gain += if is_zero { 1 } else { -1 };
                } else {
                    prob *= 1.0 - p;
                }
            }
            total += prob * gain.max(0) as f64;
        }
        total
    }

    #[test]
    fn drift_matches_enumeration() {
        let n = 10;
        // frozen from exact_drift: all-zeros standard drift is the binomial mean
        assert!((exact_drift(n, n, LabOperator::Standard) - 1.0).abs() < 1e-12);
        for op in [LabOperator::Standard, ASYM1, LabOperator::Asymmetric { c_s: 3.0, c_t: 2.0 }] {
            for sampling in [Sampling::PerBit, Sampling::Skip] {
                let ks = [10, 6, 3, 1];
                let measured = drift_experiment(n, &ks, op, 200_000, 17, sampling).unwrap();
                for p in measured {
                    let exact = exact_drift(n, p.k, op);
                    assert!(
                        (p.mean_gain - exact).abs() < 5.0 * p.std_error + 1e-9,
                        "{op:?} {sampling:?} k={} measured {} exact {exact}",
                        p.k,
                        p.mean_gain
                    );
                }
            }
        }
    }

    #[test]
    fn skip_and_per_bit_agree_in_distribution() {
        let runs = 400;
        for op in [LabOperator::Standard, ASYM1] {
            let m = |s: Sampling| {
                (0..runs).map(|seed| run_to_optimum(32, op, seed, s).unwrap() as f64).sum::<f64>() / runs as f64
            };
            let a = m(Sampling::PerBit);
            let b = m(Sampling::Skip);
            assert!((a - b).abs() / a < 0.1, "{op:?}: {a} vs {b}");
        }
    }
}
