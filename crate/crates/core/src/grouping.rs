//! Seeded group dealing and per-group presentation shuffling for one stage.

use rand::seq::SliceRandom;

use crate::domain::Candidate;
use crate::seed;

/// Group membership and the order each group is shown to the judge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupAssignment<'a> {
    /// Members of each group in dealing order (ascending initial rank).
    pub groups: Vec<Vec<&'a Candidate>>,
    /// Per group, a permutation of its members.
    pub presentation: Vec<Vec<&'a Candidate>>,
}

impl<'a> GroupAssignment<'a> {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn member_ids(&self, group: usize) -> Vec<&'a str> {
        self.groups[group]
            .iter()
            .map(|c| c.doc_id.as_str())
            .collect()
    }

    pub fn presented_ids(&self, group: usize) -> Vec<&'a str> {
        self.presentation[group]
            .iter()
            .map(|c| c.doc_id.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupingError {
    #[error("cannot group an empty survivor set")]
    Empty,
    #[error("group count {groups} out of range 1..={survivors}")]
    GroupCount { groups: usize, survivors: usize },
}

/// Deals survivors round-robin: position `p` of the initial-rank ordering
/// goes to group `p mod groups`. Input order is ignored; survivors are
/// sorted by `initial_rank` first.
pub fn assign_groups<'a>(
    survivors: &[&'a Candidate],
    groups: usize,
) -> Result<GroupAssignment<'a>, GroupingError> {
    let mut ordered: Vec<&'a Candidate> = survivors.to_vec();
    ordered.sort_by_key(|c| c.initial_rank);
    deal_in_order(&ordered, groups)
}

/// Round-robin dealing of `ordered` as given, without re-sorting.
pub fn deal_in_order<'a>(
    ordered: &[&'a Candidate],
    groups: usize,
) -> Result<GroupAssignment<'a>, GroupingError> {
    if ordered.is_empty() {
        return Err(GroupingError::Empty);
    }
    if groups == 0 || groups > ordered.len() {
        return Err(GroupingError::GroupCount {
            groups,
            survivors: ordered.len(),
        });
    }
    let mut dealt: Vec<Vec<&'a Candidate>> = (0..groups)
        .map(|_| Vec::with_capacity(ordered.len().div_ceil(groups)))
        .collect();
    for (p, c) in ordered.iter().enumerate() {
        dealt[p % groups].push(*c);
    }
    Ok(GroupAssignment {
        presentation: dealt.clone(),
        groups: dealt,
    })
}

/// Replaces each group's presentation with a uniform permutation drawn
/// from a generator seeded by `mix(seed, group)`. Membership is untouched.
pub fn shuffle_presentation<'a>(
    mut assignment: GroupAssignment<'a>,
    seed: u64,
) -> GroupAssignment<'a> {
    for (g, members) in assignment.groups.iter().enumerate() {
        let mut order = members.clone();
        let mut rng = seed::rng(seed::mix(seed, &[g as u64]));
        order.shuffle(&mut rng);
        assignment.presentation[g] = order;
    }
    assignment
}
