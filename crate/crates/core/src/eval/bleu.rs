use std::collections::HashMap;
use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;

pub const MAX_ORDER: usize = 4;
pub const DEFAULT_BOOTSTRAP_SAMPLES: usize = 1000;
pub const MIN_BOOTSTRAP_SAMPLES: usize = 100;

/// Sufficient statistics of corpus BLEU; corpus stats are the sum of the
/// sentence stats.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, other: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn sentence<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Self {
        let mut stats = BleuStats { hyp_len: hyp.len(), ref_len: reference.len(), ..Default::default() };
        for n in 1..=MAX_ORDER {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            stats.totals[n - 1] = hyp.len().saturating_sub(n - 1);
            stats.matches[n - 1] = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
        }
        stats
    }

    /// BLEU in `[0, 100]`.
    ///
    /// Orders for which the hypothesis side has no n-grams at all are left
    /// out of the geometric mean; any other order with zero matches gives 0
    /// unless `smooth` is set (add-one on orders 2..4).
    pub fn score(&self, smooth: bool) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            let (m, t) = (self.matches[n] as f64, self.totals[n] as f64);
            if self.totals[n] == 0 {
                continue;
            }
            let p = if smooth && n > 0 { (m + 1.0) / (t + 1.0) } else { m / t };
            if p == 0.0 {
                return 0.0;
            }
            log_sum += p.ln();
            orders += 1;
        }
        let bp =
            if self.hyp_len < self.ref_len { (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp() } else { 1.0 };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

fn check_sizes(hyps: usize, refs: usize) -> Result<(), EvalError> {
    if hyps != refs {
        return Err(EvalError::LengthMismatch { what: "hypotheses vs references", left: hyps, right: refs });
    }
    if hyps == 0 {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(())
}

pub fn sentence_stats<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<Vec<BleuStats>, EvalError> {
    check_sizes(hyps.len(), refs.len())?;
    Ok(hyps.iter().zip(refs).map(|(h, r)| BleuStats::sentence(h, r)).collect())
}

/// Unsmoothed corpus BLEU over whitespace tokens as given.
pub fn corpus_bleu<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<f64, EvalError> {
    corpus_bleu_with(hyps, refs, false)
}

pub fn corpus_bleu_with<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>], smooth: bool) -> Result<f64, EvalError> {
    let mut total = BleuStats::default();
    for s in sentence_stats(hyps, refs)? {
        total += s;
    }
    Ok(total.score(smooth))
}

/// Paired bootstrap resampling: the fraction of resampled corpora on which
/// system A does not beat system B. Ties count against A.
pub fn bootstrap_significance<S: AsRef<str>>(
    hyps_a: &[Vec<S>],
    hyps_b: &[Vec<S>],
    refs: &[Vec<S>],
    samples: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    check_sizes(hyps_b.len(), refs.len())?;
    let a = sentence_stats(hyps_a, refs)?;
    let b = sentence_stats(hyps_b, refs)?;
    if samples < MIN_BOOTSTRAP_SAMPLES {
        return Err(EvalError::TooFewSamples { samples, min: MIN_BOOTSTRAP_SAMPLES });
    }
    let n = a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut not_better = 0usize;
    for _ in 0..samples {
        let (mut sa, mut sb) = (BleuStats::default(), BleuStats::default());
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            sa += a[i];
            sb += b[i];
        }
        if sa.score(false) <= sb.score(false) {
            not_better += 1;
        }
    }
    Ok(not_better as f64 / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| l.split_whitespace().map(String::from).collect()).collect()
    }

    /// Textbook formula, written out independently of `BleuStats`.
    fn reference_bleu(hyp: &[&str], reference: &[&str]) -> f64 {
        let mut log_p = 0.0;
        for n in 1..=4 {
            let grams = |s: &[&str]| -> Vec<String> { s.windows(n).map(|w| w.join(" ")).collect() };
            let h = grams(hyp);
            let mut r = grams(reference);
            let mut hit = 0;
            for g in &h {
                if let Some(k) = r.iter().position(|x| x == g) {
                    r.remove(k);
                    hit += 1;
                }
            }
            log_p += (hit as f64 / h.len() as f64).ln() / 4.0;
        }
        let (c, r) = (hyp.len() as f64, reference.len() as f64);
        let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
        100.0 * bp * log_p.exp()
    }

    #[test]
    fn identical_corpus_scores_100() {
        let c = corpus(&["a b c d e", "x y", "In Nevada ist ein Pilot@@ projekt abgeschlossen"]);
        assert!((corpus_bleu(&c, &c).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn brevity_penalty_case() {
        let h = corpus(&["a b c d"]);
        let r = corpus(&["a b c d e"]);
        let score = corpus_bleu(&h, &r).unwrap();
        let expected = 100.0 * (1.0f64 - 5.0 / 4.0).exp();
        assert!((score - expected).abs() < 1e-9);
        assert!((score - 77.88).abs() < 0.01);
        assert!((score - reference_bleu(&["a", "b", "c", "d"], &["a", "b", "c", "d", "e"])).abs() < 1e-9);
    }

    #[test]
    fn no_four_gram_overlap_is_zero() {
        let h = corpus(&["a b c x e f g"]);
        let r = corpus(&["a b c d e f g"]);
        assert_eq!(corpus_bleu(&h, &r).unwrap(), 0.0);
        assert!(corpus_bleu_with(&h, &r, true).unwrap() > 0.0);
    }

    #[test]
    fn clipping() {
        let s = BleuStats::sentence(&["the", "the", "the"], &["the", "cat"]);
        assert_eq!(s.matches[0], 1);
        assert_eq!(s.totals[0], 3);
    }

    #[test]
    fn errors() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(matches!(corpus_bleu(&empty, &empty), Err(EvalError::EmptyCorpus)));
        assert!(matches!(corpus_bleu(&corpus(&["a"]), &corpus(&["a", "b"])), Err(EvalError::LengthMismatch { .. })));
        let c = corpus(&["a"]);
        assert!(matches!(bootstrap_significance(&c, &c, &c, 10, 0), Err(EvalError::TooFewSamples { .. })));
        assert!(matches!(bootstrap_significance(&empty, &empty, &empty, 100, 0), Err(EvalError::EmptyCorpus)));
    }

    #[test]
    fn bootstrap_extremes() {
        let refs = corpus(&["a b c d e", "f g h i j", "k l m n o"]);
        assert_eq!(bootstrap_significance(&refs, &refs, &refs, 200, 1).unwrap(), 1.0);
        let junk = corpus(&["z z z z z", "y y y y y", "q q q q q"]);
        assert_eq!(bootstrap_significance(&refs, &junk, &refs, 200, 1).unwrap(), 0.0);
    }

    #[test]
    fn bootstrap_is_seeded() {
        let refs = corpus(&["a b c d e", "f g h i j", "k l m n o", "p q r s t"]);
        let a = corpus(&["a b c d e", "f g x i j", "k l m n o", "p q r s"]);
        let b = corpus(&["a b c d", "f g h i j", "k x m n o", "p q r s t"]);
        let p1 = bootstrap_significance(&a, &b, &refs, 1000, 42).unwrap();
        let p2 = bootstrap_significance(&a, &b, &refs, 1000, 42).unwrap();
        assert_eq!(p1.to_bits(), p2.to_bits());
        assert!((0.0..=1.0).contains(&p1));
    }

    proptest! {
        #[test]
        fn matches_textbook_formula(
            hyp in prop::collection::vec(0u8..4, 4..10),
            reference in prop::collection::vec(0u8..4, 4..10),
        ) {
            let h: Vec<String> = hyp.iter().map(|x| x.to_string()).collect();
            let r: Vec<String> = reference.iter().map(|x| x.to_string()).collect();
            let hs: Vec<&str> = h.iter().map(String::as_str).collect();
            let rs: Vec<&str> = r.iter().map(String::as_str).collect();
            let ours = corpus_bleu(std::slice::from_ref(&h), std::slice::from_ref(&r)).unwrap();
            let theirs = reference_bleu(&hs, &rs);
            let theirs = if theirs.is_finite() { theirs } else { 0.0 };
            prop_assert!((ours - theirs).abs() < 1e-9, "{} vs {}", ours, theirs);
        }

        #[test]
        fn self_bleu_and_permutation(
            lines in prop::collection::vec(prop::collection::vec("[a-d]", 1..8), 1..6),
            rot in 0usize..6,
        ) {
            prop_assert!((corpus_bleu(&lines, &lines).unwrap() - 100.0).abs() < 1e-9);
            let hyps: Vec<Vec<String>> = lines.iter().map(|l| l.iter().rev().cloned().collect()).collect();
            let s = corpus_bleu(&hyps, &lines).unwrap();
            prop_assert!((0.0..=100.0).contains(&s));
            let k = rot % lines.len();
            let (mut h2, mut r2) = (hyps.clone(), lines.clone());
            h2.rotate_left(k);
            r2.rotate_left(k);
            prop_assert!((corpus_bleu(&h2, &r2).unwrap() - s).abs() < 1e-9);
        }
    }
}
