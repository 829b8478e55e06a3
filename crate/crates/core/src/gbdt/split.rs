use super::{DenseMatrix, TrainParams};

/// Relative slack within which two split gains count as tied. Ties go to the
/// lowest feature index, then the lowest threshold.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Rows with `value < threshold` go left.
    pub threshold: f64,
    pub gain: f64,
}

/// Midpoint of two consecutive distinct sorted values, nudged to `hi` when
/// the two are adjacent floats so that `lo < threshold <= hi` holds.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mut m = (lo + hi) / 2.0;
    if !m.is_finite() {
        m = lo / 2.0 + hi / 2.0;
    }
    if m > lo && m <= hi {
        m
    } else {
        hi
    }
}

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Running argmax over candidates offered in (feature, threshold) order.
#[derive(Debug, Default)]
pub(crate) struct BestSplit {
    best: Option<SplitCandidate>,
}

impl BestSplit {
    pub(crate) fn offer(&mut self, candidate: SplitCandidate) {
        if candidate.gain <= 0.0 {
            return;
        }
        match self.best {
            Some(b) if candidate.gain <= b.gain + GAIN_TIE_TOLERANCE * b.gain.abs().max(1.0) => {}
            _ => self.best = Some(candidate),
        }
    }

    pub(crate) fn into_inner(self) -> Option<SplitCandidate> {
        self.best
    }
}

/// Scans one feature whose node rows are given in ascending `(value, row)`
/// order and offers every admissible threshold to `best`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scan_feature(
    matrix: &DenseMatrix,
    feature: usize,
    sorted_rows: &[usize],
    grads: &[f64],
    hess: &[f64],
    total_g: f64,
    total_h: f64,
    params: &TrainParams,
    best: &mut BestSplit,
) {
    let lambda = params.lambda;
    let parent = score(total_g, total_h, lambda);
    let mut gl = 0.0;
    let mut hl = 0.0;
    for w in sorted_rows.windows(2) {
        let (r, next) = (w[0], w[1]);
        gl += grads[r];
        hl += hess[r];
        let lo = matrix.get(r, feature);
        let hi = matrix.get(next, feature);
        if lo == hi {
            continue;
        }
        let gr = total_g - gl;
        let hr = total_h - hl;
        if hl < params.min_child_weight || hr < params.min_child_weight {
            continue;
        }
        let gain = 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - parent) - params.gamma;
        best.offer(SplitCandidate {
            feature,
            threshold: midpoint(lo, hi),
            gain,
        });
    }
}

/// Sum of gradients and hessians over `rows` in ascending row order.
pub(crate) fn node_totals(rows_ascending: &[usize], grads: &[f64], hess: &[f64]) -> (f64, f64) {
    rows_ascending
        .iter()
        .fold((0.0, 0.0), |(g, h), &r| (g + grads[r], h + hess[r]))
}

/// Exact greedy search for the highest-gain split of `rows` over
/// `features`. Returns `None` when no split has positive gain with both
/// children meeting `min_child_weight`.
pub fn best_split(
    matrix: &DenseMatrix,
    rows: &[usize],
    features: &[usize],
    grads: &[f64],
    hess: &[f64],
    params: &TrainParams,
) -> Option<SplitCandidate> {
    let mut ascending = rows.to_vec();
    ascending.sort_unstable();
    let (total_g, total_h) = node_totals(&ascending, grads, hess);

    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best = BestSplit::default();
    let mut sorted = ascending.clone();
    for &f in &features {
        sorted.sort_by(|&a, &b| {
            matrix
                .get(a, f)
                .total_cmp(&matrix.get(b, f))
                .then(a.cmp(&b))
        });
        scan_feature(
            matrix, f, &sorted, grads, hess, total_g, total_h, params, &mut best,
        );
    }
    best.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TrainParams {
        TrainParams {
            min_child_weight: 0.0,
            ..TrainParams::default()
        }
    }

    #[test]
    fn identical_labels_yield_no_split() {
        let m = DenseMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = vec![-0.5; 4];
        let h = vec![0.25; 4];
        assert_eq!(best_split(&m, &[0, 1, 2, 3], &[0], &g, &h, &params()), None);
    }

    #[test]
    fn four_row_step() {
        // labels [0, 0, 1, 1] at margin 0
        let m = DenseMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = vec![0.5, 0.5, -0.5, -0.5];
        let h = vec![0.25; 4];
        let s = best_split(&m, &[0, 1, 2, 3], &[0], &g, &h, &params()).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 1.5);
        // 0.5 * (1 / 1.5 + 1 / 1.5 - 0)
        assert!((s.gain - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn min_child_weight_blocks_small_children() {
        let m = DenseMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = vec![0.5, 0.5, -0.5, -0.5];
        let h = vec![0.25; 4];
        let p = TrainParams {
            min_child_weight: 0.6,
            ..TrainParams::default()
        };
        assert_eq!(best_split(&m, &[0, 1, 2, 3], &[0], &g, &h, &p), None);
    }

    #[test]
    fn gamma_can_suppress_split() {
        let m = DenseMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = vec![0.5, 0.5, -0.5, -0.5];
        let h = vec![0.25; 4];
        let p = TrainParams {
            gamma: 1.0,
            ..params()
        };
        assert_eq!(best_split(&m, &[0, 1, 2, 3], &[0], &g, &h, &p), None);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // two identical columns
        let m = DenseMatrix::new(4, 2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let g = vec![0.5, 0.5, -0.5, -0.5];
        let h = vec![0.25; 4];
        let s = best_split(&m, &[0, 1, 2, 3], &[1, 0], &g, &h, &params()).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn midpoint_of_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(lo < m && m <= hi);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }
}
