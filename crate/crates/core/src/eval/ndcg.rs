use num_traits::Float;

use crate::judge::Grades;

fn gain<T: Float>(grade: u32) -> T {
    // 2^g - 1
    T::from(2.0f64.powi(grade as i32) - 1.0).unwrap_or_else(T::max_value)
}

fn discount<T: Float>(position: usize) -> T {
    // position is 1-based
    T::from(position as f64 + 1.0)
        .expect("position fits")
        .log2()
}

/// DCG@k with exponential gain and `log2(i + 1)` discount.
pub fn dcg_at_k<T, S>(ranking: &[S], grades: &Grades, k: usize) -> T
where
    T: Float,
    S: AsRef<str>,
{
    ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| {
            let g = grades.get(d.as_ref()).copied().unwrap_or(0);
            gain::<T>(g) / discount::<T>(i + 1)
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Ideal DCG@k over every judged document for the query.
pub fn ideal_dcg_at_k<T: Float>(grades: &Grades, k: usize) -> T {
    let mut sorted: Vec<u32> = grades.values().copied().collect();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| gain::<T>(g) / discount::<T>(i + 1))
        .fold(T::zero(), |a, b| a + b)
}

/// NDCG@k in `[0, 1]`; 0 when the query has no relevant documents.
pub fn ndcg_at_k<T, S>(ranking: &[S], grades: &Grades, k: usize) -> T
where
    T: Float,
    S: AsRef<str>,
{
    let ideal: T = ideal_dcg_at_k(grades, k);
    if ideal <= T::zero() {
        return T::zero();
    }
    dcg_at_k::<T, S>(ranking, grades, k) / ideal
}
