use crate::seed::fnv1a;

/// Adds signed-hash counts of the unigrams and bigrams of `tokens` into
/// `buckets`. Bucket and sign come from a single stable 64-bit hash, so the
/// layout is identical on every platform.
pub fn hash_ngrams<S: AsRef<str>>(tokens: &[S], buckets: &mut [f64]) {
    let dims = buckets.len() as u64;
    if dims == 0 {
        return;
    }
    let mut add = |key: &[u8]| {
        let h = fnv1a(key);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        buckets[(h % dims) as usize] += sign;
    };
    for t in tokens {
        let mut key = Vec::with_capacity(t.as_ref().len() + 2);
        key.extend_from_slice(b"1\x1f");
        key.extend_from_slice(t.as_ref().as_bytes());
        add(&key);
    }
    for w in tokens.windows(2) {
        let (a, b) = (w[0].as_ref(), w[1].as_ref());
        let mut key = Vec::with_capacity(a.len() + b.len() + 3);
        key.extend_from_slice(b"2\x1f");
        key.extend_from_slice(a.as_bytes());
        key.push(0x1f);
        key.extend_from_slice(b.as_bytes());
        add(&key);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unigrams_only(tokens: &[String], dims: usize) -> Vec<f64> {
        let mut b = vec![0.0; dims];
        for t in tokens {
            hash_ngrams(std::slice::from_ref(t), &mut b);
        }
        b
    }

    #[test]
    fn deterministic_layout() {
        let mut a = vec![0.0; 64];
        hash_ngrams(&["import", "numpy"], &mut a);
        let mut b = vec![0.0; 64];
        hash_ngrams(&["import", "numpy"], &mut b);
        assert_eq!(a, b);
        // Three n-grams, each contributing +-1.
        assert_eq!(a.iter().map(|v| v.abs()).sum::<f64>() as i32 % 2, 1);
    }

    proptest! {
        #[test]
        fn unigram_buckets_order_invariant(tokens in proptest::collection::vec("[a-z]{1,5}", 0..12), seed in any::<u64>()) {
            let mut shuffled = tokens.clone();
            let n = shuffled.len();
            if n > 1 {
                for i in (1..n).rev() {
                    let j = (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize;
                    shuffled.swap(i, j);
                }
            }
            prop_assert_eq!(unigrams_only(&tokens, 64), unigrams_only(&shuffled, 64));
        }
    }
}
