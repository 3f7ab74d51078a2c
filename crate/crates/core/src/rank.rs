use std::cmp::Ordering;

/// Orders by descending score, ties by ascending id.
pub(crate) fn by_score_then_id(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Positions of the `top_k` best entries, best first.
pub(crate) fn top_positions<S: AsRef<str>>(ids: &[S], scores: &[f64], top_k: usize) -> Vec<usize> {
    debug_assert_eq!(ids.len(), scores.len());
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&x, &y| {
        by_score_then_id((scores[x], ids[x].as_ref()), (scores[y], ids[y].as_ref()))
    });
    order.truncate(top_k);
    order
}
