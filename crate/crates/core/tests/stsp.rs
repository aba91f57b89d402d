use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use stsp_core::distributions::{GammaLaw, PoissonLaw, RngSeed};
use stsp_core::special_math::{
    adaptive_gauss_kronrod, i_integral, ln_beta, ln_gamma, ln_nb_coef, Quadrature, StableParams,
};
use stsp_core::stsp::*;

fn quad() -> Quadrature {
    Quadrature::default()
}

/// Statistics built directly from per-trait score lists.
fn stats_from_scores(n: u64, traits: &[Vec<u64>], r: f64) -> SuffStats {
    let mut s = SuffStats::empty(n, r);
    for scores in traits {
        s.m.push(scores.len() as u64);
        s.q.push(scores.iter().sum());
        for &a in scores {
            *s.score_hist.entry(a).or_insert(0) += 1;
            s.log_factorial_sum += ln_gamma(a as f64 + 1.0);
        }
    }
    s.k_n = traits.len() as u64;
    s.set_r(r);
    s
}

/// Nondecreasing tuples of length `k` over `1..=max`, with the number of
/// distinct orderings of each.
fn multisets(k: usize, max: u64) -> Vec<(Vec<u64>, f64)> {
    fn rec(k: usize, lo: u64, max: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in lo..=max {
            cur.push(a);
            rec(k, a, max, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, 1, max, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|t| {
            let mut counts: BTreeMap<u64, u32> = BTreeMap::new();
            for &a in &t {
                *counts.entry(a).or_insert(0) += 1;
            }
            let mut orderings = (1..=k).product::<usize>() as f64;
            for &c in counts.values() {
                orderings /= (1..=c as usize).product::<usize>() as f64;
            }
            (t, orderings)
        })
        .collect()
}

fn factorial(k: usize) -> f64 {
    (1..=k).product::<usize>() as f64
}

/// Sum over all one-step continuations of `marginal(n+1) / marginal(n)`:
/// each old trait receives a score in `0..=old_max`, and `K <= k_max` new
/// traits receive scores in `1..=new_max`. New traits are unlabeled, hence
/// the `1/K!` weight on ordered score tuples.
fn continuation_mass<F>(
    n: u64,
    old: &[Vec<u64>],
    old_max: u64,
    k_max: usize,
    new_max: u64,
    log_marginal: F,
) -> f64
where
    F: Fn(&SuffStats) -> f64,
{
    let base = log_marginal(&stats_from_scores(n, old, 1.0));
    let mut total = 0.0;
    let mut old_choices: Vec<Vec<u64>> = vec![vec![]];
    for _ in old {
        old_choices = old_choices
            .into_iter()
            .flat_map(|c| (0..=old_max).map(move |a| [c.clone(), vec![a]].concat()))
            .collect();
    }
    for choice in &old_choices {
        let mut traits: Vec<Vec<u64>> = old.to_vec();
        for (t, &a) in traits.iter_mut().zip(choice) {
            if a > 0 {
                t.push(a);
            }
        }
        for k in 0..=k_max {
            for (new_scores, orderings) in multisets(k, new_max) {
                let mut all = traits.clone();
                all.extend(new_scores.iter().map(|&a| vec![a]));
                let v = log_marginal(&stats_from_scores(n + 1, &all, 1.0));
                total += orderings / factorial(k) * (v - base).exp();
            }
        }
    }
    total
}

#[test]
fn nb_chain_rule() {
    let params = StableParams::new(0.05, 0.1, 1.0, 5.0).unwrap();
    let old = vec![vec![2, 1]];
    let q = quad();
    let total = continuation_mass(2, &old, 40, 4, 15, |s| {
        log_marginal_nb(&s.clone().with_r(params.r), &params, &q).unwrap()
    });
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn nb_chain_rule_non_integer_r() {
    let params = StableParams::new(0.05, 0.1, 1.0, 4.5).unwrap();
    let old = vec![vec![1, 1]];
    let q = quad();
    let total = continuation_mass(2, &old, 40, 4, 15, |s| {
        log_marginal_nb(&s.clone().with_r(params.r), &params, &q).unwrap()
    });
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn sbsp_chain_rule() {
    let params = StableParams::new(0.3, 0.5, 2.0, 1.0).unwrap();
    let old = vec![vec![1], vec![1, 1]];
    let total = continuation_mass(2, &old, 1, 12, 1, |s| log_marginal_sbsp(s, &params).unwrap());
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

#[test]
fn poisson_continuations_match_unseen_law() {
    let params = StableParams::new(0.2, 0.5, 1.0, 2.0).unwrap();
    let q = quad();
    let old = vec![vec![3]];
    let base = stats_from_scores(1, &old, params.r);
    let unseen = unseen_traits_law(&base, &params, 1, &q).unwrap();
    let total = continuation_mass(1, &old, 40, 2, 30, |s| log_marginal_poisson(s, &params, &q).unwrap());
    let beyond: f64 = 1.0 - (0..=2).map(|k| unseen.pmf(k)).sum::<f64>();
    assert!((total - (1.0 - beyond)).abs() < 1e-7, "{total} vs {}", 1.0 - beyond);
}

#[test]
fn theta_cancels() {
    let q = quad();
    let s = stats_from_scores(3, &[vec![1, 4], vec![2]], 3.0);
    let base = StableParams::new(0.4, 2.0, 1.0, 3.0).unwrap();
    let nb = log_marginal_nb(&s, &base, &q).unwrap();
    let pois = log_marginal_poisson(&s, &base, &q).unwrap();
    for lambda in [0.1, 10.0] {
        let p = StableParams { theta: lambda, ..base };
        assert!((log_marginal_nb(&s, &p, &q).unwrap() - nb).abs() < 1e-12);
        assert!((log_marginal_poisson(&s, &p, &q).unwrap() - pois).abs() < 1e-12);
    }
}

/// Marginal density of a count dataset given the tilt `x = ζ^{-α}`, with the
/// per-trait rate integrals supplied; then mixed over `x ~ Gamma(c, θ)` by
/// adaptive quadrature.
fn mixed_over_tilt(params: &StableParams, n: u64, k: u64, log_trait_integrals: f64, log_score_const: f64) -> f64 {
    let q = quad();
    let i_n = i_integral(params.r, n, params.alpha, &q).unwrap();
    let prior = GammaLaw::new(params.c, params.theta).unwrap();
    let (theta, alpha) = (params.theta, params.alpha);
    let integrand = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let ln = prior.logpdf(x) - theta * alpha * x * i_n + k as f64 * (theta * alpha * x).ln()
            + log_trait_integrals
            + log_score_const;
        ln.exp()
    };
    let (v, _) = adaptive_gauss_kronrod(integrand, 0.0, 400.0, 0.0, 1e-12, 5000);
    v.ln()
}

/// `∫ s^{q-1-α}·h(s) ds` style rate integral with the origin flattened by
/// `s = t^{1/(1+lead)}`.
fn rate_integral<F: Fn(f64) -> f64>(log_f: F, lead: f64) -> f64 {
    let p = 1.0 / (1.0 + lead);
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let s = t.powf(p);
        (log_f(s) + p.ln() + (p - 1.0) * t.ln()).exp()
    };
    let (a, _) = adaptive_gauss_kronrod(g, 0.0, 1.0, 0.0, 1e-13, 5000);
    let (b, _) = adaptive_gauss_kronrod(g, 1.0, 200f64.powf(1.0 / p), 0.0, 1e-13, 5000);
    (a + b).ln()
}

#[test]
fn poisson_marginal_matches_nested_quadrature() {
    let params = StableParams::new(0.35, 1.7, 0.8, 2.5).unwrap();
    let scores = vec![vec![1, 2]];
    let n = 3u64;
    let stats = stats_from_scores(n, &scores, params.r);
    let value = log_marginal_poisson(&stats, &params, &quad()).unwrap();
    let (alpha, r) = (params.alpha, params.r);
    let qsum = 3.0;
    let log_f = |s: f64| {
        -s * (r * n as f64 + 1.0) - (1.0 + alpha) * (-(-s).exp_m1()).ln() + qsum * (r * s).ln()
    };
    let trait_integral = rate_integral(log_f, qsum - 1.0 - alpha);
    let oracle = mixed_over_tilt(&params, n, 1, trait_integral, -(2f64).ln());
    assert!((value - oracle).abs() < 1e-8, "{value} vs {oracle}");
}

#[test]
fn nb_marginal_matches_nested_quadrature() {
    let params = StableParams::new(0.6, 0.7, 3.0, 1.5).unwrap();
    let scores = vec![vec![3], vec![1, 1, 2]];
    let n = 4u64;
    let stats = stats_from_scores(n, &scores, params.r);
    let value = log_marginal_nb(&stats, &params, &quad()).unwrap();
    let (alpha, r) = (params.alpha, params.r);
    let mut log_traits = 0.0;
    let mut log_const = 0.0;
    for t in &scores {
        let qsum: u64 = t.iter().sum();
        let log_f =
            |s: f64| -s * (r * n as f64 + 1.0) + (qsum as f64 - 1.0 - alpha) * (-(-s).exp_m1()).ln();
        log_traits += rate_integral(log_f, qsum as f64 - 1.0 - alpha);
        log_const += t.iter().map(|&a| ln_nb_coef(a as f64, r)).sum::<f64>();
    }
    let oracle = mixed_over_tilt(&params, n, 2, log_traits, log_const);
    assert!((value - oracle).abs() < 1e-8, "{value} vs {oracle}");
}

#[test]
fn poisson_marginal_monte_carlo() {
    // Importance sampling over the tilt (prior draws) and each trait rate
    // (Gamma(q - α, rn + 1) proposal).
    let params = StableParams::new(0.3, 2.0, 1.0, 1.0).unwrap();
    let n = 2u64;
    let scores = vec![vec![1, 1], vec![3]];
    let stats = stats_from_scores(n, &scores, params.r);
    let exact = log_marginal_poisson(&stats, &params, &quad()).unwrap().exp();
    let (alpha, r, c, theta) = (params.alpha, params.r, params.c, params.theta);
    let i_n = i_integral(r, n, alpha, &quad()).unwrap();
    let mut rng = RngSeed::new(77).rng();
    let prior = GammaLaw::new(c, theta).unwrap();
    let draws = 200_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let x = prior.sample(&mut rng).unwrap();
        let mut w = (-theta * alpha * x * i_n).exp();
        for t in &scores {
            let q: u64 = t.iter().sum();
            let shape = q as f64 - alpha;
            let rate = r * n as f64 + 1.0;
            let proposal = GammaLaw::new(shape, rate).unwrap();
            let s = proposal.sample(&mut rng).unwrap();
            let ln_target = -s * rate - (1.0 + alpha) * (-(-s).exp_m1()).ln() + q as f64 * (r * s).ln();
            let ln_fact: f64 = t.iter().map(|&a| ln_gamma(a as f64 + 1.0)).sum();
            w *= theta * alpha * x * (ln_target - proposal.logpdf(s) - ln_fact).exp();
        }
        sum += w;
        sum_sq += w * w;
    }
    let mean = sum / draws as f64;
    let se = ((sum_sq / draws as f64 - mean * mean) / draws as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} ± {se} vs {exact}");
}

#[test]
fn nb_single_trait_example() {
    let p = StableParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
    let s = stats_from_scores(1, &[vec![2]], 1.0);
    let i1 = i_integral(1.0, 1, 0.5, &quad()).unwrap();
    assert!((i1 - 2.0).abs() < 1e-14);
    let expect = (0.5f64).ln() - 2.0 * (1.0 + 0.5 * i1).ln() + ln_beta(2.0, 1.5);
    assert!((log_marginal_nb(&s, &p, &quad()).unwrap() - expect).abs() < 1e-13);
}

#[test]
fn empty_marginals() {
    let p = StableParams::new(0.3, 4.0, 1.0, 2.0).unwrap();
    let q = quad();
    let s = SuffStats::empty(5, 2.0);
    let expect = -4.0 * (1.0 + 0.3 * i_integral(2.0, 5, 0.3, &q).unwrap()).ln();
    assert!((log_marginal_nb(&s, &p, &q).unwrap() - expect).abs() < 1e-13);
    assert!((log_marginal_poisson(&s, &p, &q).unwrap() - expect).abs() < 1e-13);
    let data = TraitDataset::new(5, ScoreKind::Real);
    let expect1 = -4.0 * (1.0 + 0.3 * i_integral(1.0, 5, 0.3, &q).unwrap()).ln();
    assert!((log_marginal_spike_slab(&data, &p, &q).unwrap() - expect1).abs() < 1e-13);
}

#[test]
fn spike_slab_single_trait_matches_quadrature() {
    let (alpha, c, n) = (0.4, 1.5, 3usize);
    let p = StableParams::new(alpha, c, 1.0, 1.0).unwrap();
    let mut data = TraitDataset::from_triples(n, ScoreKind::Real, [(1, "w", 0.7)]).unwrap();
    data.traits[0].atom_param = Some(0.7);
    let q = quad();
    let value = log_marginal_spike_slab(&data, &p, &q).unwrap();
    // G = (2π)^{-1/2} ∫ e^{-sn} s^{1/2} (1-e^{-s})^{-α} ds
    let log_f = |s: f64| -s * n as f64 + 0.5 * s.ln() - alpha * (-(-s).exp_m1()).ln();
    let log_g = rate_integral(log_f, 0.5 - alpha) - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let i_n = i_integral(1.0, n as u64, alpha, &q).unwrap();
    let oracle = ln_gamma(c + 1.0) - ln_gamma(c) + alpha.ln() + log_g - (c + 1.0) * (1.0 + alpha * i_n).ln();
    assert!(((value - oracle) / oracle).abs() < 1e-6, "{value} vs {oracle}");
    assert!((value - oracle).abs() < 1e-9);
}

#[test]
fn spike_slab_translation_invariance() {
    let p = StableParams::new(0.25, 2.0, 1.0, 1.0).unwrap();
    let q = quad();
    let build = |shift: f64| {
        let mut data = TraitDataset::from_triples(
            4,
            ScoreKind::Real,
            [(0, "a", 1.2 + shift), (2, "a", -0.4 + shift), (3, "b", 2.5 + shift)],
        )
        .unwrap();
        data.traits[0].atom_param = Some(0.3 + shift);
        data.traits[1].atom_param = Some(2.0 + shift);
        data
    };
    let base = log_marginal_spike_slab(&build(0.0), &p, &q).unwrap();
    let shifted = log_marginal_spike_slab(&build(17.5), &p, &q).unwrap();
    assert!((base - shifted).abs() < 1e-10);
}

#[test]
fn spike_slab_is_a_density_in_the_scores() {
    // one observation, one trait: integrating the marginal ratio over the
    // displayed score recovers Pr(one new trait) · E[new-trait density] = the
    // K = 1 term; compared with the unseen-traits count law at r = 1.
    let p = StableParams::new(0.3, 1.2, 1.0, 1.0).unwrap();
    let q = quad();
    let eta = 0.0;
    let density = |y: f64| {
        let mut data = TraitDataset::from_triples(1, ScoreKind::Real, [(0, "w", y)]).unwrap();
        data.traits[0].atom_param = Some(eta);
        let empty = TraitDataset::new(0, ScoreKind::Real);
        (log_marginal_spike_slab(&data, &p, &q).unwrap() - log_marginal_spike_slab(&empty, &p, &q).unwrap()).exp()
    };
    // heavy |y|^{2α-3} tails: integrate over the whole line with y = tan(u)
    let on_angle = |u: f64| {
        let c = u.cos();
        density(u.tan()) / (c * c)
    };
    let half = std::f64::consts::FRAC_PI_2;
    let (mass, _) = adaptive_gauss_kronrod(on_angle, -half, half, 0.0, 1e-10, 2000);
    let unseen = unseen_traits_law(&SuffStats::empty(0, 1.0), &p, 1, &q).unwrap();
    assert!((mass - unseen.pmf(1)).abs() < 1e-8, "{mass} vs {}", unseen.pmf(1));
}

#[test]
fn posterior_tilt_mixture_reproduces_unseen_law() {
    let params = StableParams::new(0.3, 60.0, 1.7, 10.0).unwrap();
    let q = quad();
    let stats = stats_from_scores(25, &[vec![1, 2, 1], vec![4], vec![1]], params.r);
    let tilt = posterior_tilt(&stats, &params, &q).unwrap();
    let m = 7u64;
    let law = unseen_traits_law(&stats, &params, m, &q).unwrap();
    let delta = i_integral(params.r, 32, params.alpha, &q).unwrap() - i_integral(params.r, 25, params.alpha, &q).unwrap();
    let scale = params.theta * params.alpha * delta;
    let (lo, hi) = (tilt.mean() * 1e-3, tilt.mean() * 4.0);
    for k in 0..=50u64 {
        let integrand = |x: f64| (tilt.logpdf(x) + PoissonLaw::new(scale * x).unwrap().logpmf(k)).exp();
        let (mass, _) = adaptive_gauss_kronrod(integrand, lo, hi, 0.0, 1e-13, 5000);
        assert!((mass - law.pmf(k)).abs() < 1e-8, "k={k}: {mass} vs {}", law.pmf(k));
    }
}

#[test]
fn posterior_tilt_example_and_monotonicity() {
    let params = StableParams::new(0.3, 60.0, 1.0, 10.0).unwrap();
    let q = quad();
    let s = SuffStats { k_n: 40, ..SuffStats::empty(250, 10.0) };
    let law = posterior_tilt(&s, &params, &q).unwrap();
    let closed: f64 = (1..=2500).map(|i| ln_beta(0.7, i as f64).exp()).sum();
    assert_eq!(law.shape, 100.0);
    assert!((law.rate - (1.0 + 0.3 * closed)).abs() < 1e-10 * law.rate);
    let more = posterior_tilt(&SuffStats { k_n: 41, ..s.clone() }, &params, &q).unwrap();
    let later = posterior_tilt(&SuffStats { n: 251, ..s }, &params, &q).unwrap();
    assert!(more.shape > law.shape && later.rate > law.rate);
}

#[test]
fn first_customer_new_traits() {
    let params = StableParams::new(0.3, 60.0, 1.0, 10.0).unwrap();
    let q = quad();
    let law = unseen_traits_law(&SuffStats::empty(0, 10.0), &params, 1, &q).unwrap();
    let i1 = i_integral(10.0, 1, 0.3, &q).unwrap();
    assert_eq!(law.size, 60.0);
    assert!((law.success_prob - 1.0 / (1.0 + 0.3 * i1)).abs() < 1e-15);
}

#[test]
fn predictive_zero_entry_matches_quadrature() {
    for &(qs, n, alpha, r) in &[(3u64, 5u64, 0.3, 10.0), (1, 1, 0.7, 2.5), (12, 40, 0.1, 1.0)] {
        let params = StableParams::new(alpha, 1.0, 1.0, r).unwrap();
        let table = predictive_old_trait_pmf(qs, n, &params, 1 << 20, 1e-8).unwrap();
        let log_f = |s: f64| {
            (qs as f64 - alpha - 1.0) * (-(-s).exp_m1()).ln() - s * r * (n + 1) as f64 - s
        };
        let oracle = rate_integral(log_f, qs as f64 - alpha - 1.0) - ln_beta(r * n as f64 + 1.0, qs as f64 - alpha);
        assert!((table.logpmf[0] - oracle).abs() < 1e-9, "{} vs {oracle}", table.logpmf[0]);
        let total: f64 = table.logpmf.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-8);
        assert!(table.tail_mass <= 1e-8);
    }
}

#[test]
fn predictive_mean_increases_with_score_total() {
    let params = StableParams::new(0.3, 1.0, 1.0, 5.0).unwrap();
    let mean = |q: u64| {
        let t = predictive_old_trait_pmf(q, 10, &params, 1 << 20, 1e-10).unwrap();
        t.logpmf.iter().enumerate().map(|(k, v)| k as f64 * v.exp()).sum::<f64>()
    };
    let means: Vec<f64> = (1..8).map(mean).collect();
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}

fn dataset_strategy() -> impl Strategy<Value = Vec<(usize, usize, u32)>> {
    prop::collection::vec((0usize..5, 0usize..6, 1u32..6), 1..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn marginals_are_exchangeable(triples in dataset_strategy(), seed in 0u64..1000) {
        let params = StableParams::new(0.35, 1.5, 1.0, 2.0).unwrap();
        let q = quad();
        let n_obs = 5;
        let build = |perm: &[usize], trait_order: bool| {
            let mut ts: Vec<(usize, String, f64)> =
                triples.iter().map(|&(i, t, a)| (perm[i], format!("t{t}"), a as f64)).collect();
            if trait_order {
                ts.reverse();
            }
            TraitDataset::from_triples(n_obs, ScoreKind::Count, ts).unwrap()
        };
        let identity: Vec<usize> = (0..n_obs).collect();
        let mut perm = identity.clone();
        perm.shuffle(&mut RngSeed::new(seed).rng());
        let base = build(&identity, false);
        let permuted = build(&perm, true);
        let s0 = suff_stats(&base, params.r).unwrap();
        let s1 = suff_stats(&permuted, params.r).unwrap();
        let nb0 = log_marginal_nb(&s0, &params, &q).unwrap();
        let nb1 = log_marginal_nb(&s1, &params, &q).unwrap();
        prop_assert!((nb0 - nb1).abs() < 1e-10 * nb0.abs().max(1.0));
        let p0 = log_marginal_poisson(&s0, &params, &q).unwrap();
        let p1 = log_marginal_poisson(&s1, &params, &q).unwrap();
        prop_assert!((p0 - p1).abs() < 1e-10 * p0.abs().max(1.0));
        let b0 = log_marginal_sbsp(&suff_stats(&base.binarize(), 1.0).unwrap(), &params).unwrap();
        let b1 = log_marginal_sbsp(&suff_stats(&permuted.binarize(), 1.0).unwrap(), &params).unwrap();
        prop_assert!((b0 - b1).abs() < 1e-10 * b0.abs().max(1.0));
    }

    #[test]
    fn predictive_recurrence_matches_closed_form(q in 1u64..50, n in 1u64..50, k in 0u64..60,
                                                 alpha in 0.01f64..0.99, r in 0.5f64..20.0) {
        let params = StableParams::new(alpha, 1.0, 1.0, r).unwrap();
        if let Ok(t) = predictive_old_trait_pmf(q, n, &params, 1 << 14, 1e-4) {
            if (k as usize) < t.logpmf.len() {
                let direct = log_predictive_old_trait(q, n, k, alpha, r);
                prop_assert!((t.logpmf[k as usize] - direct).abs() < 1e-9 * direct.abs().max(1.0));
            }
        }
    }
}
