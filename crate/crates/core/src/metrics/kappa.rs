//! Continuous-time pseudo-kappa with chance agreement estimated by random
//! re-pairing of files, and bootstrap percentile confidence intervals.
//!
//! Every random draw comes from a ChaCha stream keyed by `(seed, stream)`:
//! stream 0 drives the point estimate's permutations and stream `r + 1`
//! drives bootstrap replicate `r`. Replicates therefore give the same numbers
//! whatever order or thread they run on.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::confusion::confusion;
use super::intervals::IntervalSet;
use crate::error::{Error, Result};

pub const DEFAULT_PERMUTATIONS: usize = 100;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// Below this, `1 − p_e` is treated as zero.
const DEGENERATE_EPS: f64 = 1e-9;

/// Landis–Koch agreement bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    None,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl Interpretation {
    pub fn of(kappa: f64) -> Self {
        match kappa {
            k if k <= 0.0 => Interpretation::None,
            k if k <= 0.20 => Interpretation::Slight,
            k if k <= 0.40 => Interpretation::Fair,
            k if k <= 0.60 => Interpretation::Moderate,
            k if k <= 0.80 => Interpretation::Substantial,
            _ => Interpretation::AlmostPerfect,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Interpretation::None => "no agreement",
            Interpretation::Slight => "slight",
            Interpretation::Fair => "fair",
            Interpretation::Moderate => "moderate",
            Interpretation::Substantial => "substantial",
            Interpretation::AlmostPerfect => "almost perfect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaResult {
    pub p_o: f64,
    pub p_e: f64,
    pub kappa: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_permutations: usize,
    pub n_bootstrap: usize,
    /// Bootstrap replicates dropped because their chance agreement was 1.
    pub n_degenerate_replicates: usize,
    pub seed: u64,
    pub interpretation: Interpretation,
    /// Set when the percentile interval does not contain the point estimate.
    pub ci_excludes_estimate: bool,
}

/// Agreement time and domain length for every (reference i, hypothesis j)
/// pairing, truncated to the shorter of the two files.
struct PairTable {
    n: usize,
    agree: Vec<f64>,
    total: Vec<f64>,
}

impl PairTable {
    fn build(pairs: &[(IntervalSet, IntervalSet)]) -> Result<Self> {
        let n = pairs.len();
        for (i, (a, b)) in pairs.iter().enumerate() {
            if (a.domain_s() - b.domain_s()).abs() > 1e-9 {
                return Err(Error::DomainMismatch(format!(
                    "pair {i}: reference {} s vs hypothesis {} s",
                    a.domain_s(),
                    b.domain_s()
                )));
            }
        }
        let cells: Vec<(f64, f64)> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let a = &pairs[i].0;
                let b = &pairs[j].1;
                let t = a.domain_s().min(b.domain_s());
                let c = confusion(&a.truncate(t), &b.truncate(t)).expect("equal truncated domains");
                (c.agreement(), t)
            })
            .collect();
        let (agree, total) = cells.into_iter().unzip();
        Ok(Self { n, agree, total })
    }

    fn fraction(&self, rows: &[usize], cols: impl Iterator<Item = usize>) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (&i, j) in rows.iter().zip(cols) {
            num += self.agree[i * self.n + j];
            den += self.total[i * self.n + j];
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// (p_o, p_e, kappa) for the files listed in `rows` (with repetition).
    fn kappa(&self, rows: &[usize], n_permutations: usize, rng: &mut impl Rng) -> Result<(f64, f64, f64)> {
        let p_o = self.fraction(rows, rows.iter().copied());
        let m = rows.len();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut sum = 0.0;
        for _ in 0..n_permutations {
            derangement(&mut perm, rng);
            sum += self.fraction(rows, perm.iter().map(|&p| rows[p]));
        }
        let p_e = sum / n_permutations as f64;
        if 1.0 - p_e < DEGENERATE_EPS {
            return Err(Error::DegenerateChance);
        }
        Ok((p_o, p_e, (p_o - p_e) / (1.0 - p_e)))
    }
}

/// Uniform random permutation without fixed points (for length ≥ 2), by
/// rejection.
fn derangement(perm: &mut [usize], rng: &mut impl Rng) {
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    if perm.len() < 2 {
        return;
    }
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return;
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_inputs(pairs: &[(IntervalSet, IntervalSet)], n_permutations: usize) -> Result<()> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientFiles(pairs.len()));
    }
    if n_permutations == 0 {
        return Err(Error::InvalidParameter("n_permutations must be positive".into()));
    }
    Ok(())
}

/// Pseudo-kappa of reference/hypothesis pairs, one pair per file.
///
/// p_o is the pooled fraction of time on which each pair agrees; p_e is the
/// mean of the same statistic over `n_permutations` random re-pairings in
/// which no file keeps its own hypothesis.
pub fn pseudo_kappa(pairs: &[(IntervalSet, IntervalSet)], n_permutations: usize, seed: u64) -> Result<KappaResult> {
    check_inputs(pairs, n_permutations)?;
    let table = PairTable::build(pairs)?;
    let rows: Vec<usize> = (0..pairs.len()).collect();
    let (p_o, p_e, kappa) = table.kappa(&rows, n_permutations, &mut stream_rng(seed, 0))?;
    Ok(KappaResult {
        p_o,
        p_e,
        kappa,
        ci_low: None,
        ci_high: None,
        n_permutations,
        n_bootstrap: 0,
        n_degenerate_replicates: 0,
        seed,
        interpretation: Interpretation::of(kappa),
        ci_excludes_estimate: false,
    })
}

/// Bootstrap percentile interval for pseudo-kappa.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
    pub n_used: usize,
    pub n_degenerate: usize,
}

/// Resample files with replacement `n_bootstrap` times, recompute kappa on
/// each replicate and take the 2.5th and 97.5th percentiles.
pub fn bootstrap_ci(
    pairs: &[(IntervalSet, IntervalSet)],
    n_bootstrap: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<BootstrapCi> {
    check_inputs(pairs, n_permutations)?;
    if n_bootstrap == 0 {
        return Err(Error::InvalidParameter("n_bootstrap must be positive".into()));
    }
    let table = PairTable::build(pairs)?;
    bootstrap_with_table(&table, n_bootstrap, n_permutations, seed)
}

fn bootstrap_with_table(table: &PairTable, n_bootstrap: usize, n_permutations: usize, seed: u64) -> Result<BootstrapCi> {
    let n = table.n;
    let replicates: Vec<Option<f64>> = (0..n_bootstrap)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64 + 1);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            table.kappa(&rows, n_permutations, &mut rng).ok().map(|(_, _, k)| k)
        })
        .collect();
    let mut values: Vec<f64> = replicates.iter().flatten().copied().collect();
    let n_degenerate = n_bootstrap - values.len();
    if values.is_empty() {
        return Err(Error::DegenerateChance);
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        low: percentile(&values, 0.025),
        high: percentile(&values, 0.975),
        n_used: values.len(),
        n_degenerate,
    })
}

/// Linear interpolation between order statistics of sorted `v`.
pub fn percentile(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Point estimate plus bootstrap interval.
pub fn kappa_with_ci(
    pairs: &[(IntervalSet, IntervalSet)],
    n_permutations: usize,
    n_bootstrap: usize,
    seed: u64,
) -> Result<KappaResult> {
    check_inputs(pairs, n_permutations)?;
    let table = PairTable::build(pairs)?;
    let rows: Vec<usize> = (0..pairs.len()).collect();
    let (p_o, p_e, kappa) = table.kappa(&rows, n_permutations, &mut stream_rng(seed, 0))?;
    let mut result = KappaResult {
        p_o,
        p_e,
        kappa,
        ci_low: None,
        ci_high: None,
        n_permutations,
        n_bootstrap,
        n_degenerate_replicates: 0,
        seed,
        interpretation: Interpretation::of(kappa),
        ci_excludes_estimate: false,
    };
    if n_bootstrap > 0 {
        let ci = bootstrap_with_table(&table, n_bootstrap, n_permutations, seed)?;
        result.ci_low = Some(ci.low);
        result.ci_high = Some(ci.high);
        result.n_degenerate_replicates = ci.n_degenerate;
        result.ci_excludes_estimate = kappa < ci.low || kappa > ci.high;
        if result.ci_excludes_estimate {
            log::warn!("bootstrap interval [{}, {}] excludes kappa {kappa}", ci.low, ci.high);
        }
    }
    Ok(result)
}
