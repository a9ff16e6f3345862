use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionKind, NUM_ACTIONS};

/// A deterministic map from context cell to action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyTable {
    pub action_of_cell: Vec<ActionKind>,
}

impl PolicyTable {
    pub fn new(action_of_cell: Vec<ActionKind>) -> Self {
        PolicyTable { action_of_cell }
    }

    pub fn constant(num_cells: usize, action: ActionKind) -> Self {
        PolicyTable::new(vec![action; num_cells])
    }

    pub fn num_cells(&self) -> usize {
        self.action_of_cell.len()
    }

    pub fn action(&self, cell: usize) -> Result<ActionKind> {
        self.action_of_cell
            .get(cell)
            .copied()
            .ok_or_else(|| Error::domain(format!("policy has no action for cell {cell}")))
    }

    /// Cells where the two tables disagree.
    pub fn distance(&self, other: &PolicyTable) -> usize {
        self.action_of_cell
            .iter()
            .zip(&other.action_of_cell)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// A finite, pairwise-distinct list of policy tables over the same cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PolicyTable>", into = "Vec<PolicyTable>")]
pub struct PolicyClass {
    policies: Vec<PolicyTable>,
}

impl TryFrom<Vec<PolicyTable>> for PolicyClass {
    type Error = Error;

    fn try_from(policies: Vec<PolicyTable>) -> Result<Self> {
        PolicyClass::new(policies)
    }
}

impl From<PolicyClass> for Vec<PolicyTable> {
    fn from(class: PolicyClass) -> Self {
        class.policies
    }
}

impl PolicyClass {
    pub fn new(policies: Vec<PolicyTable>) -> Result<Self> {
        let first = policies
            .first()
            .ok_or_else(|| Error::config("policy class must not be empty"))?;
        let cells = first.num_cells();
        if policies.iter().any(|p| p.num_cells() != cells) {
            return Err(Error::config("all policies must cover the same cells"));
        }
        let mut seen = HashSet::new();
        if !policies.iter().all(|p| seen.insert(p)) {
            return Err(Error::config("policies in a class must be pairwise distinct"));
        }
        Ok(PolicyClass { policies })
    }

    pub fn size(&self) -> usize {
        self.policies.len()
    }

    pub fn num_cells(&self) -> usize {
        self.policies[0].num_cells()
    }

    pub fn policies(&self) -> &[PolicyTable] {
        &self.policies
    }

    pub fn get(&self, index: usize) -> &PolicyTable {
        &self.policies[index]
    }

    /// Action each policy takes at `cell`.
    pub fn actions_at(&self, cell: usize) -> impl Iterator<Item = ActionKind> + '_ {
        self.policies.iter().map(move |p| p.action_of_cell[cell])
    }
}

fn table_from_code(mut code: u64, num_cells: usize) -> PolicyTable {
    let mut actions = Vec::with_capacity(num_cells);
    for _ in 0..num_cells {
        actions.push(ActionKind::ALL[(code % NUM_ACTIONS as u64) as usize]);
        code /= NUM_ACTIONS as u64;
    }
    PolicyTable::new(actions)
}

fn total_tables(num_cells: usize) -> Option<u64> {
    u32::try_from(num_cells).ok().and_then(|n| 3u64.checked_pow(n))
}

fn uniform_tables(num_cells: usize) -> Vec<PolicyTable> {
    ActionKind::ALL
        .iter()
        .map(|&a| PolicyTable::constant(num_cells, a))
        .collect()
}

/// The three uniform tables first, then the remaining tables in base-3 order
/// until `min(max_size, 3^num_cells)` policies are collected.
pub fn enumerate_policy_class(num_cells: usize, max_size: usize) -> Result<PolicyClass> {
    build_class(num_cells, max_size, None)
}

/// Like [`enumerate_policy_class`], but the non-uniform tables are a random
/// distinct subset drawn from `seed`.
pub fn sample_policy_class(num_cells: usize, max_size: usize, seed: u64) -> Result<PolicyClass> {
    build_class(num_cells, max_size, Some(seed))
}

fn build_class(num_cells: usize, max_size: usize, seed: Option<u64>) -> Result<PolicyClass> {
    if num_cells == 0 {
        return Err(Error::config("policy class needs at least one cell"));
    }
    if max_size == 0 {
        return Err(Error::config("max_size must be at least 1"));
    }
    let total = total_tables(num_cells);
    let target = match total {
        Some(t) if (t as u128) < max_size as u128 => t as usize,
        _ => max_size,
    };
    let mut policies: Vec<PolicyTable> = uniform_tables(num_cells);
    policies.truncate(target);
    let mut seen: HashSet<PolicyTable> = policies.iter().cloned().collect();

    match seed {
        Some(seed) if total.is_none_or(|t| t as usize > target) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while policies.len() < target {
                let actions = (0..num_cells)
                    .map(|_| *ActionKind::ALL.choose(&mut rng).expect("non-empty"))
                    .collect();
                let table = PolicyTable::new(actions);
                if seen.insert(table.clone()) {
                    policies.push(table);
                }
            }
        }
        _ => {
            let mut code = 0u64;
            while policies.len() < target {
                let table = table_from_code(code, num_cells);
                if seen.insert(table.clone()) {
                    policies.push(table);
                }
                code += 1;
            }
        }
    }
    PolicyClass::new(policies)
}
