//! Ground-truth judges for desk-scale verification.

use std::cmp::Reverse;

use rand::Rng as _;

use super::{
    Grades, Judge, JudgeError, JudgeRequest, JudgeSelection, OrderingJudge, OrderingRequest,
};
use crate::domain::Candidate;
use crate::seed;

/// Noise level and seed for [`NoisyJudge`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    epsilon: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self, JudgeError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(JudgeError::InvalidRequest(format!(
                "epsilon must be in [0, 1], got {epsilon}"
            )));
        }
        Ok(Self { epsilon, seed })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

fn grade(grades: &Grades, doc: &Candidate) -> u32 {
    grades.get(&doc.doc_id).copied().unwrap_or(0)
}

/// Labels sorted by (grade desc, initial_rank asc, label asc).
fn ranked_labels(presented: &[&Candidate], grades: &Grades) -> Vec<usize> {
    let mut labels: Vec<usize> = (1..=presented.len()).collect();
    labels.sort_by_key(|&l| {
        let d = presented[l - 1];
        (Reverse(grade(grades, d)), d.initial_rank, l)
    });
    labels
}

/// The `m` best-graded labels, best first.
pub fn oracle_select(request: &JudgeRequest<'_>, grades: &Grades) -> JudgeSelection {
    let mut labels = ranked_labels(&request.presented, grades);
    labels.truncate(request.select);
    JudgeSelection::exact(labels)
}

/// Oracle selection with each chosen slot independently swapped, with
/// probability `epsilon`, for a uniformly drawn currently-unchosen label.
pub fn noisy_select(
    request: &JudgeRequest<'_>,
    grades: &Grades,
    noise: &NoiseSpec,
) -> JudgeSelection {
    let mut chosen = oracle_select(request, grades).chosen_labels;
    let mut rest: Vec<usize> = (1..=request.len())
        .filter(|l| !chosen.contains(l))
        .collect();
    let mut rng = seed::rng(seed::mix(noise.seed, &[request.fingerprint()]));
    for slot in chosen.iter_mut() {
        if rest.is_empty() {
            break;
        }
        if rng.gen_bool(noise.epsilon) {
            let j = rng.gen_range(0..rest.len());
            std::mem::swap(slot, &mut rest[j]);
        }
    }
    JudgeSelection::exact(chosen)
}

/// Full oracle permutation, best first.
pub fn oracle_order(request: &OrderingRequest<'_>, grades: &Grades) -> JudgeSelection {
    JudgeSelection::exact(ranked_labels(&request.presented, grades))
}

/// Oracle permutation where each position is, with probability `epsilon`,
/// swapped with a uniformly drawn other position.
pub fn noisy_order(
    request: &OrderingRequest<'_>,
    grades: &Grades,
    noise: &NoiseSpec,
) -> JudgeSelection {
    let mut order = ranked_labels(&request.presented, grades);
    let n = order.len();
    if n < 2 {
        return JudgeSelection::exact(order);
    }
    let mut rng = seed::rng(seed::mix(noise.seed, &[request.fingerprint()]));
    for i in 0..n {
        if rng.gen_bool(noise.epsilon) {
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            order.swap(i, j);
        }
    }
    JudgeSelection::exact(order)
}

/// Picks by true grade. Deterministic.
#[derive(Clone, Debug, Default)]
pub struct OracleJudge {
    grades: Grades,
}

impl OracleJudge {
    pub fn new(grades: Grades) -> Self {
        Self { grades }
    }

    pub fn grades(&self) -> &Grades {
        &self.grades
    }
}

impl Judge for OracleJudge {
    fn select(&self, request: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        request.validate()?;
        Ok(oracle_select(request, &self.grades))
    }
}

impl OrderingJudge for OracleJudge {
    fn order(&self, request: &OrderingRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        Ok(oracle_order(request, &self.grades))
    }
}

/// Oracle perturbed by seeded noise. Deterministic given the request and seed.
#[derive(Clone, Debug)]
pub struct NoisyJudge {
    grades: Grades,
    noise: NoiseSpec,
}

impl NoisyJudge {
    pub fn new(grades: Grades, noise: NoiseSpec) -> Self {
        Self { grades, noise }
    }
}

impl Judge for NoisyJudge {
    fn select(&self, request: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        request.validate()?;
        Ok(noisy_select(request, &self.grades, &self.noise))
    }
}

impl OrderingJudge for NoisyJudge {
    fn order(&self, request: &OrderingRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        Ok(noisy_order(request, &self.grades, &self.noise))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn docs(ranks: &[u32]) -> Vec<Candidate> {
        ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| Candidate::new(format!("d{}", i + 1), "", r))
            .collect()
    }

    fn grades_of(g: &[u32]) -> Grades {
        g.iter()
            .enumerate()
            .map(|(i, &v)| (format!("d{}", i + 1), v))
            .collect()
    }

    #[test]
    fn top_grades_win() {
        let d = docs(&[1, 2, 3]);
        let req = JudgeRequest::new("q", d.iter().collect(), 2);
        let sel = OracleJudge::new(grades_of(&[3, 0, 2]))
            .select(&req)
            .unwrap();
        assert_eq!(sel.chosen_labels, vec![1, 3]);
        assert!(!sel.repair_applied);
    }

    #[test]
    fn single_winner() {
        let d = docs(&[1, 2, 3]);
        let req = JudgeRequest::new("q", d.iter().collect(), 1);
        assert_eq!(
            oracle_select(&req, &grades_of(&[0, 0, 1])).chosen_labels,
            vec![3]
        );
    }

    #[test]
    fn ties_break_by_initial_rank() {
        let d = docs(&[7, 3, 9]);
        let req = JudgeRequest::new("q", d.iter().collect(), 2);
        assert_eq!(
            oracle_select(&req, &grades_of(&[1, 1, 1])).chosen_labels,
            vec![2, 1]
        );
    }

    #[test]
    fn missing_grade_is_zero() {
        let d = docs(&[2, 1]);
        let req = JudgeRequest::new("q", d.iter().collect(), 1);
        let g: Grades = [("d1".to_string(), 1)].into();
        assert_eq!(oracle_select(&req, &g).chosen_labels, vec![1]);
        assert_eq!(oracle_select(&req, &Grades::new()).chosen_labels, vec![2]);
    }

    #[test]
    fn m_equal_n_minus_one_excludes_one() {
        let d = docs(&[1, 2, 3, 4, 5]);
        let req = JudgeRequest::new("q", d.iter().collect(), 4);
        let noisy = NoisyJudge::new(grades_of(&[1, 2, 3, 0, 1]), NoiseSpec::new(0.5, 3).unwrap());
        let mut sel = noisy.select(&req).unwrap().chosen_labels;
        sel.sort();
        sel.dedup();
        assert_eq!(sel.len(), 4);
    }

    #[test]
    fn invalid_requests_rejected() {
        let d = docs(&[1, 2]);
        let j = OracleJudge::default();
        assert!(j
            .select(&JudgeRequest::new("q", d.iter().collect(), 2))
            .is_err());
        assert!(j
            .select(&JudgeRequest::new("q", d.iter().collect(), 0))
            .is_err());
        assert!(NoiseSpec::new(1.5, 0).is_err());
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn zero_noise_matches_oracle_on_random_requests() {
        let mut rng = seed::rng(11);
        let noise = NoiseSpec::new(0.0, 99).unwrap();
        for _ in 0..1000 {
            let n = rng.gen_range(2..=20);
            let m = rng.gen_range(1..n);
            let mut ranks: Vec<u32> = (1..=n as u32).collect();
            ranks.shuffle(&mut rng);
            let d = docs(&ranks);
            let g: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let gr = grades_of(&g);
            let req = JudgeRequest::new("q", d.iter().collect(), m);
            assert_eq!(noisy_select(&req, &gr, &noise), oracle_select(&req, &gr));
        }
    }

    #[test]
    fn full_noise_forces_swap() {
        let noise = NoiseSpec::new(1.0, 5).unwrap();
        for s in 0..50u32 {
            let d = docs(&[1, 2]);
            let q = format!("q{s}");
            let req = JudgeRequest::new(&q, d.iter().collect(), 1);
            let g = grades_of(&[s % 2, 1 - s % 2]);
            let oracle = oracle_select(&req, &g).chosen_labels[0];
            assert_eq!(
                noisy_select(&req, &g, &noise).chosen_labels,
                vec![3 - oracle]
            );
        }
    }

    #[test]
    fn noise_rate_matches_epsilon() {
        let noise = NoiseSpec::new(0.2, 2024).unwrap();
        let d = docs(&(1..=20).collect::<Vec<_>>());
        let g = grades_of(&(0..20).rev().collect::<Vec<_>>());
        let mut perturbed = 0usize;
        let trials = 10_000;
        for t in 0..trials {
            let q = format!("trial {t}");
            let req = JudgeRequest::new(&q, d.iter().collect(), 10);
            let base = oracle_select(&req, &g).chosen_labels;
            let got = noisy_select(&req, &g, &noise).chosen_labels;
            perturbed += base.iter().zip(&got).filter(|(a, b)| a != b).count();
        }
        let rate = perturbed as f64 / (trials * 10) as f64;
        assert!((0.19..=0.21).contains(&rate), "rate {rate}");
    }

    #[test]
    fn noisy_order_is_permutation_and_deterministic() {
        let d = docs(&(1..=20).collect::<Vec<_>>());
        let g = grades_of(&(0..20).collect::<Vec<_>>());
        let req = OrderingRequest::new("q", d.iter().collect());
        let noise = NoiseSpec::new(0.3, 1).unwrap();
        let a = noisy_order(&req, &g, &noise);
        assert_eq!(a, noisy_order(&req, &g, &noise));
        let mut sorted = a.chosen_labels.clone();
        sorted.sort();
        assert_eq!(sorted, (1..=20).collect::<Vec<_>>());
        let clean = oracle_order(&req, &g).chosen_labels;
        assert_eq!(clean, (1..=20).rev().collect::<Vec<_>>());
    }

    fn brute_top_m(presented: &[&Candidate], g: &Grades, m: usize) -> Vec<String> {
        // compare every pair: a label is chosen iff fewer than m labels beat it
        let key = |l: usize| {
            let d = presented[l - 1];
            (
                g.get(&d.doc_id).copied().unwrap_or(0) as i64,
                -(d.initial_rank as i64),
                -(l as i64),
            )
        };
        let mut out = Vec::new();
        for l in 1..=presented.len() {
            let beaten_by = (1..=presented.len()).filter(|&o| key(o) > key(l)).count();
            if beaten_by < m {
                out.push(presented[l - 1].doc_id.clone());
            }
        }
        out.sort();
        out
    }

    fn chosen_ids(req: &JudgeRequest<'_>, sel: &JudgeSelection) -> Vec<String> {
        let mut ids: Vec<String> = sel
            .chosen_labels
            .iter()
            .map(|&l| req.doc(l).doc_id.clone())
            .collect();
        ids.sort();
        ids
    }

    proptest! {
        #[test]
        fn oracle_equals_brute_force(
            grades in proptest::collection::vec(0u32..4, 2..=20),
            m_frac in 0.0f64..1.0,
            seed: u64,
        ) {
            let n = grades.len();
            let m = 1 + ((n - 1) as f64 * m_frac) as usize;
            prop_assume!(m < n);
            let mut ranks: Vec<u32> = (1..=n as u32).collect();
            ranks.shuffle(&mut seed::rng(seed));
            let d = docs(&ranks);
            let g = grades_of(&grades);
            let req = JudgeRequest::new("q", d.iter().collect(), m);
            let sel = oracle_select(&req, &g);
            prop_assert_eq!(chosen_ids(&req, &sel), brute_top_m(&req.presented, &g, m));
        }

        #[test]
        fn oracle_set_invariant_under_presentation(
            grades in proptest::collection::vec(0u32..4, 2..=20),
            seed: u64,
        ) {
            let n = grades.len();
            let d = docs(&(1..=n as u32).collect::<Vec<_>>());
            let g = grades_of(&grades);
            let m = n / 2 + usize::from(n / 2 == 0);
            prop_assume!(m < n);
            let base = JudgeRequest::new("q", d.iter().collect(), m);
            let mut shuffled = base.presented.clone();
            shuffled.shuffle(&mut seed::rng(seed));
            let other = JudgeRequest::new("q", shuffled, m);
            prop_assert_eq!(
                chosen_ids(&base, &oracle_select(&base, &g)),
                chosen_ids(&other, &oracle_select(&other, &g))
            );
        }
    }
}
