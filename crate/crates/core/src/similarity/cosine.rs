use std::cmp::Ordering;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    /// At least one input was the zero vector; `value` is then 0.
    pub degenerate: bool,
}

impl Cosine {
    fn from_parts(dot: f64, norm_a_sq: f64, norm_b_sq: f64) -> Cosine {
        if norm_a_sq == 0.0 || norm_b_sq == 0.0 {
            return Cosine {
                value: 0.0,
                degenerate: true,
            };
        }
        let value = dot / (norm_a_sq.sqrt() * norm_b_sq.sqrt());
        Cosine {
            value: value.clamp(-1.0, 1.0),
            degenerate: false,
        }
    }
}

/// Cosine over sparse vectors keyed by an ordered type, by merge-join on keys.
pub fn cosine_sparse<K, V>(a: &BTreeMap<K, V>, b: &BTreeMap<K, V>) -> Cosine
where
    K: Ord,
    V: Copy + Into<f64>,
{
    let mut dot = 0.0;
    let mut ia = a.iter().peekable();
    let mut ib = b.iter().peekable();
    while let (Some((ka, va)), Some((kb, vb))) = (ia.peek(), ib.peek()) {
        match ka.cmp(kb) {
            Ordering::Less => {
                ia.next();
            }
            Ordering::Greater => {
                ib.next();
            }
            Ordering::Equal => {
                dot += (**va).into() * (**vb).into();
                ia.next();
                ib.next();
            }
        }
    }
    let sq = |m: &BTreeMap<K, V>| m.values().map(|&v| v.into() * v.into()).sum::<f64>();
    Cosine::from_parts(dot, sq(a), sq(b))
}

/// Cosine over equal-length dense vectors.
pub fn cosine_dense(a: &[f64], b: &[f64]) -> Cosine {
    assert_eq!(a.len(), b.len(), "dense vectors must have equal length");
    let dot = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    Cosine::from_parts(dot, sq(a), sq(b))
}
