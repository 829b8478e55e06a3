//! Independent reference implementations used as test oracles. Nothing in
//! here calls into the library's metric, split or objective code.
#![allow(dead_code)]

/// Average accuracy straight from the definition, O(n^2).
pub fn aa_direct(decisions: &[bool], truth: &[bool]) -> f64 {
    let n = truth.len();
    let l: Vec<f64> = (0..n)
        .map(|i| if decisions[i] == truth[i] { 1.0 } else { 0.0 })
        .collect();
    let mut total = 0.0;
    for i in 1..=n {
        let mut hits = 0.0;
        for k in 1..=i {
            hits += l[k - 1];
        }
        let a = hits / i as f64;
        total += a * l[i - 1];
    }
    total / n as f64
}

pub fn maa_direct(sessions: &[(Vec<bool>, Vec<bool>)]) -> (f64, f64) {
    let mut maa = 0.0;
    let mut fpa = 0.0;
    for (d, t) in sessions {
        maa += aa_direct(d, t);
        if d[0] == t[0] {
            fpa += 1.0;
        }
    }
    let n = sessions.len() as f64;
    (maa / n, fpa / n)
}

/// AUC by counting every positive/negative pair.
pub fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Logistic negative log-likelihood, `ln(1 + e^m) - y * m`. Fine for
/// moderate margins.
pub fn nll_naive(margin: f64, label: bool) -> f64 {
    let y = if label { 1.0 } else { 0.0 };
    (1.0 + margin.exp()).ln() - y * margin
}

/// Central finite differences of the NLL: (first, second) derivative.
pub fn nll_derivatives_fd(margin: f64, label: bool) -> (f64, f64) {
    let s1 = 1e-6;
    let g = (nll_naive(margin + s1, label) - nll_naive(margin - s1, label)) / (2.0 * s1);
    // the second difference needs a larger step to stay out of rounding noise
    let s2 = 1e-4;
    let h = (nll_naive(margin + s2, label) - 2.0 * nll_naive(margin, label)
        + nll_naive(margin - s2, label))
        / (s2 * s2);
    (g, h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Enumerates every (feature, midpoint) pair, summing each child directly.
/// `tie_tolerance` is the relative slack under which later candidates do
/// not displace earlier ones.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_split(
    rows: &[Vec<f64>],
    grads: &[f64],
    hess: &[f64],
    lambda: f64,
    gamma: f64,
    min_child_weight: f64,
    tie_tolerance: f64,
) -> Option<BruteSplit> {
    let n_features = rows.first().map_or(0, Vec::len);
    let mut best: Option<BruteSplit> = None;
    for f in 0..n_features {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for (i, r) in rows.iter().enumerate() {
                if r[f] < threshold {
                    gl += grads[i];
                    hl += hess[i];
                } else {
                    gr += grads[i];
                    hr += hess[i];
                }
            }
            if hl < min_child_weight || hr < min_child_weight {
                continue;
            }
            let gain = 0.5
                * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
                    - (gl + gr) * (gl + gr) / (hl + hr + lambda))
                - gamma;
            if gain <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => gain > b.gain + tie_tolerance * b.gain.abs().max(1.0),
            };
            if better {
                best = Some(BruteSplit {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}
