//! Minimum edit scripts under unit-cost deletion and insertion.
//!
//! No substitution: replacing a token costs a deletion plus an insertion.
//! Ties are broken towards keeping the leftmost possible match (keep, then
//! delete, then insert, walking forward from the start of both lists).

/// How to turn `current` into `target`.
///
/// `deletions` are positions in `current`. `insertions` has one entry per
/// gap of the kept subsequence: `insertions[g]` goes right before the
/// `g`-th kept token, and the last entry goes after all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditScript<T> {
    pub deletions: Vec<usize>,
    pub insertions: Vec<Vec<T>>,
}

impl<T: Clone> EditScript<T> {
    pub fn cost(&self) -> usize {
        self.deletions.len() + self.insertions.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_identity(&self) -> bool {
        self.cost() == 0
    }

    pub fn kept_count(&self) -> usize {
        self.insertions.len() - 1
    }

    /// Deletes, then inserts.
    pub fn apply(&self, current: &[T]) -> Vec<T> {
        let mut deleted = vec![false; current.len()];
        for &d in &self.deletions {
            deleted[d] = true;
        }
        let mut out = Vec::with_capacity(current.len() + self.cost());
        let mut gaps = self.insertions.iter();
        for (t, _) in current.iter().zip(&deleted).filter(|(_, &d)| !d) {
            if let Some(ins) = gaps.next() {
                out.extend(ins.iter().cloned());
            }
            out.push(t.clone());
        }
        for ins in gaps {
            out.extend(ins.iter().cloned());
        }
        out
    }
}

/// Token-level alignment of `current` against `target`.
pub fn align_del_ins<T: PartialEq + Clone>(current: &[T], target: &[T]) -> EditScript<T> {
    align_blocks(current, &vec![1; current.len()], target)
}

/// Alignment where `current` is cut into atomic blocks of the given
/// lengths: a block is either kept whole against an equal contiguous run of
/// `target`, or deleted whole. With all lengths 1 this is
/// [`align_del_ins`].
pub fn align_blocks<T: PartialEq + Clone>(current: &[T], block_lengths: &[usize], target: &[T]) -> EditScript<T> {
    debug_assert_eq!(block_lengths.iter().sum::<usize>(), current.len());
    let mut starts = Vec::with_capacity(block_lengths.len());
    let mut at = 0;
    for &len in block_lengths {
        starts.push(at);
        at += len;
    }
    let units = block_lengths.len();
    let m = target.len();
    let width = m + 1;
    let matches = |u: usize, j: usize| -> bool {
        let (s, len) = (starts[u], block_lengths[u]);
        j + len <= m && current[s..s + len] == target[j..j + len]
    };

    // best[u][j]: most tokens that can be kept aligning units u.. with target j..
    let mut best = vec![0usize; (units + 1) * width];
    for u in (0..units).rev() {
        for j in (0..=m).rev() {
            let mut b = best[(u + 1) * width + j];
            if j < m {
                b = b.max(best[u * width + j + 1]);
            }
            if matches(u, j) {
                let len = block_lengths[u];
                b = b.max(len + best[(u + 1) * width + j + len]);
            }
            best[u * width + j] = b;
        }
    }

    let mut deletions = Vec::new();
    let mut insertions: Vec<Vec<T>> = vec![Vec::new()];
    let (mut u, mut j) = (0, 0);
    while u < units || j < m {
        let here = best[u * width + j];
        if u < units && matches(u, j) && here == block_lengths[u] + best[(u + 1) * width + j + block_lengths[u]] {
            for _ in 0..block_lengths[u] {
                insertions.push(Vec::new());
            }
            j += block_lengths[u];
            u += 1;
        } else if u < units && here == best[(u + 1) * width + j] {
            deletions.extend(starts[u]..starts[u] + block_lengths[u]);
            u += 1;
        } else {
            insertions.last_mut().expect("non-empty").push(target[j].clone());
            j += 1;
        }
    }
    EditScript { deletions, insertions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force: the longest common subsequence found by trying every
    /// subsequence of `current`.
    fn brute_force_distance(current: &[u8], target: &[u8]) -> usize {
        let n = current.len();
        let mut longest = 0;
        for bits in 0u32..(1 << n) {
            let sub: Vec<u8> = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| current[i]).collect();
            if sub.len() <= longest {
                continue;
            }
            let mut it = target.iter();
            if sub.iter().all(|c| it.any(|t| t == c)) {
                longest = sub.len();
            }
        }
        n + target.len() - 2 * longest
    }

    fn v(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn identical_lists_need_nothing() {
        let s = align_del_ins(&v("abc"), &v("abc"));
        assert!(s.is_identity());
        assert_eq!(s.kept_count(), 3);
    }

    #[test]
    fn empty_current_inserts_everything() {
        let s = align_del_ins(&v(""), &v("xy"));
        assert_eq!(s.deletions, Vec::<usize>::new());
        assert_eq!(s.insertions, vec![v("xy")]);
    }

    #[test]
    fn substitution_costs_two() {
        let s = align_del_ins(&v("abc"), &v("adc"));
        assert_eq!(s.deletions, vec![1]);
        // d lands where b was: after a, before c.
        assert_eq!(s.insertions, vec![vec![], vec!['d'], vec![]]);
        assert_eq!(s.cost(), 2);
        assert_eq!(brute_force_distance(b"abc", b"adc"), 2);
        assert_eq!(s.apply(&v("abc")), v("adc"));
    }

    #[test]
    fn prefers_leftmost_match() {
        let s = align_del_ins(&v("a"), &v("aba"));
        assert_eq!(s.insertions, vec![vec![], v("ba")]);
    }

    #[test]
    fn blocks_align_contiguously() {
        // As single tokens, a and b would be matched at 0 and 2 (leftmost).
        let cur = v("ab");
        let target = v("axab");
        let s = align_del_ins(&cur, &target);
        assert_eq!(s.insertions, vec![vec![], v("xa"), vec![]]);
        let s = align_blocks(&cur, &[2], &target);
        assert_eq!(s.insertions, vec![v("ax"), vec![], vec![]]);
        assert_eq!(s.apply(&cur), target);
    }

    #[test]
    fn unmatched_block_is_deleted_whole() {
        let s = align_blocks(&v("xaby"), &[1, 2, 1], &v("xay"));
        assert_eq!(s.deletions, vec![1, 2]);
        assert_eq!(s.apply(&v("xaby")), v("xay"));
    }

    #[test]
    fn exhaustive_short_pairs_match_brute_force() {
        fn all(max: usize) -> Vec<Vec<u8>> {
            let mut out = vec![vec![]];
            let mut frontier = vec![vec![]];
            for _ in 0..max {
                let mut next = Vec::new();
                for w in &frontier {
                    for c in 0..3u8 {
                        let mut w2: Vec<u8> = w.clone();
                        w2.push(c);
                        next.push(w2);
                    }
                }
                out.extend(next.iter().cloned());
                frontier = next;
            }
            out
        }
        let words = all(4);
        for a in &words {
            for b in &words {
                let s = align_del_ins(a, b);
                assert_eq!(s.apply(a), *b);
                assert_eq!(s.cost(), brute_force_distance(a, b), "{a:?} -> {b:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn script_is_valid_and_minimal(
            a in prop::collection::vec(0u8..5, 0..=12),
            b in prop::collection::vec(0u8..5, 0..=12),
        ) {
            let s = align_del_ins(&a, &b);
            prop_assert_eq!(s.apply(&a), b.clone());
            prop_assert_eq!(s.cost(), brute_force_distance(&a, &b));
            prop_assert!(s.deletions.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn block_script_reaches_target(
            a in prop::collection::vec(0u8..3, 0..=8),
            cuts in prop::collection::vec(1usize..4, 0..8),
            b in prop::collection::vec(0u8..3, 0..=8),
        ) {
            let mut lengths = Vec::new();
            let mut left = a.len();
            for c in cuts.into_iter().chain(std::iter::repeat(1)) {
                if left == 0 { break; }
                let c = c.min(left);
                lengths.push(c);
                left -= c;
            }
            let s = align_blocks(&a, &lengths, &b);
            prop_assert_eq!(s.apply(&a), b.clone());
            prop_assert!(s.cost() >= brute_force_distance(&a, &b));
        }
    }
}
