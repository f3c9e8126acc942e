//! Byte-level edit distance and the page-similarity criterion built on it.

use crate::model::Page;

/// Unit-cost Levenshtein distance between two byte strings, computed with a
/// two-row dynamic program in O(|a|·|b|) time and O(min(|a|,|b|)) space.
pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    if a == b {
        return 0;
    }
    // Keep the shorter string on the row axis.
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0usize; short.len() + 1];
    for (i, lc) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let substitute = prev[j] + usize::from(lc != sc);
            let insert = cur[j] + 1;
            let delete = prev[j + 1] + 1;
            cur[j + 1] = substitute.min(insert).min(delete);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Whether the edit distance is at most `max`, short-circuiting on the
/// cheap certainties: equal strings are within any bound and a length gap
/// larger than the bound already exceeds it. The full distance is only
/// computed in the remaining band of cases.
pub fn within_distance(a: &[u8], b: &[u8], max: usize) -> bool {
    if a == b {
        return true;
    }
    if a.len().abs_diff(b.len()) > max {
        return false;
    }
    levenshtein(a, b) <= max
}

/// The similarity criterion used both for state identity during crawling
/// and for output equality during relation evaluation: bodies are equal
/// when their edit distance is at most `threshold` times the longer
/// length.
pub fn bodies_similar(a: &[u8], b: &[u8], threshold: f64) -> bool {
    let max_len = a.len().max(b.len());
    let budget = (threshold * max_len as f64).floor() as usize;
    within_distance(a, b, budget)
}

/// Page equality: same status class and similar bodies. A transport error
/// placeholder (status 0) only equals another transport error.
pub fn pages_equal(a: &Page, b: &Page, threshold: f64) -> bool {
    a.status == b.status && bodies_similar(&a.body, &b.body, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook recursive definition, memoized only by its own call tree;
    /// exponential, so it is confined to short inputs.
    fn oracle(a: &[u8], b: &[u8]) -> usize {
        match (a, b) {
            ([], _) => b.len(),
            (_, []) => a.len(),
            ([ah, at @ ..], [bh, bt @ ..]) => {
                let substitute = oracle(at, bt) + usize::from(ah != bh);
                let delete = oracle(at, b) + 1;
                let insert = oracle(a, bt) + 1;
                substitute.min(delete).min(insert)
            }
        }
    }

    fn strings_up_to(len: usize, alphabet: &[u8]) -> Vec<Vec<u8>> {
        let mut out = vec![Vec::new()];
        let mut frontier = vec![Vec::new()];
        for _ in 0..len {
            let mut next = Vec::new();
            for s in &frontier {
                for &c in alphabet {
                    let mut t = s.clone();
                    t.push(c);
                    out.push(t.clone());
                    next.push(t);
                }
            }
            frontier = next;
        }
        out
    }

    #[test]
    fn matches_oracle_on_all_short_pairs() {
        let strings = strings_up_to(4, b"abc");
        for a in &strings {
            for b in &strings {
                assert_eq!(levenshtein(a, b), oracle(a, b), "a={a:?} b={b:?}");
            }
        }
    }

    #[test]
    fn known_distances() {
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein(b"", b"abc"), 3);
        assert_eq!(levenshtein(b"abc", b"abc"), 0);
        assert_eq!(levenshtein(b"flaw", b"lawn"), 2);
    }

    #[test]
    fn hundred_byte_page_with_six_edits_is_a_new_state() {
        let a = vec![b'x'; 100];
        let mut b = a.clone();
        for i in 0..6 {
            b[i * 10] = b'y';
        }
        assert_eq!(levenshtein(&a, &b), 6);
        assert!(!bodies_similar(&a, &b, 0.05), "6 edits exceed 5% of 100");
        let mut c = a.clone();
        for i in 0..5 {
            c[i * 10] = b'y';
        }
        assert!(bodies_similar(&a, &c, 0.05), "5 edits are within 5% of 100");
    }

    #[test]
    fn identical_bodies_are_one_state_at_any_threshold() {
        let body = b"<html><body>same</body></html>".to_vec();
        assert!(bodies_similar(&body, &body, 0.0));
    }

    #[test]
    fn transport_error_only_equals_transport_error() {
        let err = Page::transport_error("http://t/a", "");
        let ok = Page::new(b"hello".to_vec(), 200, "", "text/html", "http://t/a").unwrap();
        assert!(pages_equal(&err, &Page::transport_error("http://t/b", ""), 0.05));
        assert!(!pages_equal(&err, &ok, 1.0));
    }

    proptest! {
        #[test]
        fn matches_oracle_on_sampled_pairs(
            a in prop::collection::vec(0u8..3, 0..=10),
            b in prop::collection::vec(0u8..3, 0..=10),
        ) {
            prop_assert_eq!(levenshtein(&a, &b), oracle(&a, &b));
        }

        #[test]
        fn triangle_inequality(
            a in prop::collection::vec(any::<u8>(), 0..64),
            b in prop::collection::vec(any::<u8>(), 0..64),
            c in prop::collection::vec(any::<u8>(), 0..64),
        ) {
            let ab = levenshtein(&a, &b);
            let bc = levenshtein(&b, &c);
            let ac = levenshtein(&a, &c);
            prop_assert!(ac <= ab + bc);
        }

        #[test]
        fn symmetry_and_identity(
            a in prop::collection::vec(any::<u8>(), 0..48),
            b in prop::collection::vec(any::<u8>(), 0..48),
        ) {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert!((levenshtein(&a, &b) == 0) == (a == b));
        }

        #[test]
        fn within_distance_agrees_with_distance(
            a in prop::collection::vec(0u8..4, 0..24),
            b in prop::collection::vec(0u8..4, 0..24),
            max in 0usize..12,
        ) {
            prop_assert_eq!(within_distance(&a, &b, max), levenshtein(&a, &b) <= max);
        }
    }
}
