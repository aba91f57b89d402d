//! Goodness-of-fit helpers shared by the statistical tests.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square p-value of observed counts against expected
/// probabilities. Adjacent cells are merged until each expects at least
/// five draws; the probability not covered by `probs` forms a final cell.
pub fn chi_square_p(counts: &[u64], probs: &[f64], overflow: u64) -> f64 {
    let total = counts.iter().sum::<u64>() + overflow;
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (i, &p) in probs.iter().enumerate() {
        obs += counts.get(i).copied().unwrap_or(0) as f64;
        exp += p * n;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    let tail_p = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    obs += overflow as f64 + counts.iter().skip(probs.len()).sum::<u64>() as f64;
    exp += tail_p * n;
    if let Some(last) = cells.last_mut() {
        last.0 += obs;
        last.1 += exp;
    } else {
        cells.push((obs, exp));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() as f64 - 1.0).max(1.0);
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Two-sample chi-square homogeneity p-value on integer-valued samples.
pub fn two_sample_p(a: &[u64], b: &[u64]) -> f64 {
    let max = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ca = vec![0.0; max + 1];
    let mut cb = vec![0.0; max + 1];
    for &x in a {
        ca[x as usize] += 1.0;
    }
    for &x in b {
        cb[x as usize] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut oa, mut ob) = (0.0, 0.0);
    for i in 0..=max {
        oa += ca[i];
        ob += cb[i];
        if (oa + ob) * na.min(nb) / (na + nb) >= 5.0 {
            cells.push((oa, ob));
            oa = 0.0;
            ob = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += oa;
        last.1 += ob;
    }
    let mut stat = 0.0;
    for &(oa, ob) in &cells {
        let pooled = (oa + ob) / (na + nb);
        stat += (oa - pooled * na).powi(2) / (pooled * na) + (ob - pooled * nb).powi(2) / (pooled * nb);
    }
    let dof = (cells.len() as f64 - 1.0).max(1.0);
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
