//! Score-population metrics: empirical thresholds, TPR at fixed FPR,
//! AUC, and the Mann-Whitney U rank test.
//!
//! All metrics operate on plain `&[f64]` score slices so they compose
//! with any scorer. Ties are handled by midranks (AUC, U) and by
//! breaking toward the larger threshold (TPR@FPR).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("empty score population")]
    Empty,
    #[error("score {0} is not finite")]
    NonFinite(f64),
    #[error("fpr {0} outside (0, 1)")]
    BadFpr(f64),
    #[error("all scores tied; rank statistics are undefined")]
    AllTied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopulationLabel {
    Positive,
    Negative,
}

/// A labeled batch of detection scores plus a free-form note about how
/// they were generated.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePopulation {
    pub label: PopulationLabel,
    pub scores: Vec<f64>,
    pub metadata: String,
}

impl ScorePopulation {
    pub fn new(
        label: PopulationLabel,
        scores: Vec<f64>,
        metadata: impl Into<String>,
    ) -> Result<Self, EvalError> {
        check_finite(&scores)?;
        Ok(Self {
            label,
            scores,
            metadata: metadata.into(),
        })
    }
}

fn check_finite(scores: &[f64]) -> Result<(), EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    match scores.iter().find(|s| !s.is_finite()) {
        Some(&bad) => Err(EvalError::NonFinite(bad)),
        None => Ok(()),
    }
}

/// Sample mean and standard deviation (n−1 denominator; 0 for n=1).
pub fn mean_std(scores: &[f64]) -> (f64, f64) {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    if scores.len() < 2 {
        return (mean, 0.0);
    }
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Smallest threshold t with fraction(negatives > t) ≤ fpr; ties break
/// toward the larger threshold. This is the (k+1)-th largest negative
/// with k = ⌊fpr·N⌋ (an epsilon absorbs representation error in fpr·N).
pub fn threshold_at_fpr(negatives: &[f64], fpr: f64) -> Result<f64, EvalError> {
    check_finite(negatives)?;
    if !(fpr > 0.0 && fpr < 1.0) {
        return Err(EvalError::BadFpr(fpr));
    }
    let mut sorted = negatives.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    let k = ((fpr * sorted.len() as f64) + 1e-9).floor() as usize;
    Ok(sorted[k.min(sorted.len() - 1)])
}

/// Fraction of positives strictly above the empirical threshold.
pub fn tpr_at_fpr(positives: &[f64], negatives: &[f64], fpr: f64) -> Result<f64, EvalError> {
    check_finite(positives)?;
    let t = threshold_at_fpr(negatives, fpr)?;
    let hits = positives.iter().filter(|&&p| p > t).count();
    Ok(hits as f64 / positives.len() as f64)
}

/// Midranks (1-based, ties averaged) of `values`, in input order.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite scores"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a random positive outranks a random negative, ties
/// counted half: U/(n_pos·n_neg) via the midrank identity, equal to the
/// brute-force pairwise count.
pub fn auc(positives: &[f64], negatives: &[f64]) -> Result<f64, EvalError> {
    check_finite(positives)?;
    check_finite(negatives)?;
    let (u, _) = u_statistic(positives, negatives);
    Ok(u / (positives.len() as f64 * negatives.len() as f64))
}

/// Returns (U_a, combined midranks): U_a = Σranks(a) − n_a(n_a+1)/2,
/// which equals #(a > b) + ½#(a = b) over all pairs.
fn u_statistic(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&combined);
    let r_a: f64 = ranks[..a.len()].iter().sum();
    let n_a = a.len() as f64;
    (r_a - n_a * (n_a + 1.0) / 2.0, ranks)
}

/// One-tailed Mann-Whitney U test of "sample a is stochastically larger
/// than sample b". Returns (U, p). Small samples (combined ≤ 20) use the
/// exact permutation distribution with a mid-p tail; larger samples use
/// the normal approximation with tie-corrected variance and continuity
/// correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<(f64, f64), EvalError> {
    check_finite(a)?;
    check_finite(b)?;
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let all_tied = combined.iter().all(|&v| v == combined[0]);
    if all_tied {
        return Err(EvalError::AllTied);
    }
    let (u_obs, ranks) = u_statistic(a, b);
    let (n_a, n_b) = (a.len(), b.len());
    let n = n_a + n_b;
    if n <= 20 {
        // Exact: U depends only on which combined slots are labeled "a",
        // so enumerate all C(n, n_a) labelings over the fixed midranks.
        let base = n_a as f64 * (n_a as f64 + 1.0) / 2.0;
        let (mut gt, mut eq, mut total) = (0u64, 0u64, 0u64);
        for_each_combination(n, n_a, |idx| {
            let u: f64 = idx.iter().map(|&i| ranks[i]).sum::<f64>() - base;
            total += 1;
            if u > u_obs + 1e-9 {
                gt += 1;
            } else if (u - u_obs).abs() <= 1e-9 {
                eq += 1;
            }
        });
        let p = (gt as f64 + 0.5 * eq as f64) / total as f64;
        Ok((u_obs, p))
    } else {
        let (na, nb, nf) = (n_a as f64, n_b as f64, n as f64);
        let mu = na * nb / 2.0;
        let tie_term: f64 = tie_group_sizes(&combined)
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let var = na * nb / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
        if var <= 0.0 {
            return Err(EvalError::AllTied);
        }
        let z = (u_obs - mu - 0.5) / var.sqrt();
        Ok((u_obs, 0.5 * libm::erfc(z / std::f64::consts::SQRT_2)))
    }
}

fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    groups
}

/// Lexicographic walk over all k-subsets of 0..n.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k as isize - 1;
        while i >= 0 && idx[i as usize] == n - k + i as usize {
            i -= 1;
        }
        if i < 0 {
            return;
        }
        let i = i as usize;
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
