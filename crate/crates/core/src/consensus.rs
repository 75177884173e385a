//! Majority voting over repeated runs of one task on one image.
//!
//! NA runs are dropped before voting but still count in the agreement
//! denominator. Numeric answers are grouped by a greedy sweep over the sorted
//! values: each class is anchored at its smallest member `s` and absorbs every
//! value within `tolerance_pct` percent of `|s|`. The largest class wins;
//! equal sizes go to the class whose first member appeared earliest.

use crate::config::{TaskType, MAX_RUNS, MIN_RUNS};
use crate::parse::Answer;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusOutcome {
    pub value: Answer,
    /// `agreement_ratio > 0.5`.
    pub reached: bool,
    pub agreement_ratio: f64,
    pub runs: Vec<Answer>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("consensus needs between 2 and 5 runs, got {0}")]
pub struct RunCountError(pub usize);

/// One vote class: run indices of its members, in run order.
struct Class {
    members: Vec<usize>,
}

impl Class {
    fn first(&self) -> usize {
        self.members[0]
    }
}

fn numeric_classes(valid: &[(usize, f64)], tolerance_pct: f64) -> Vec<Class> {
    let mut sorted: Vec<(usize, f64)> = valid.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut assigned = vec![false; sorted.len()];
    let mut classes = Vec::new();
    for i in 0..sorted.len() {
        if assigned[i] {
            continue;
        }
        let anchor = sorted[i].1;
        let width = tolerance_pct / 100.0 * anchor.abs();
        let mut members = Vec::new();
        for j in i..sorted.len() {
            if !assigned[j] && (sorted[j].1 - anchor).abs() <= width {
                assigned[j] = true;
                members.push(sorted[j].0);
            }
        }
        members.sort_unstable();
        classes.push(Class { members });
    }
    classes
}

fn exact_classes(values: &[Answer], valid: &[usize]) -> Vec<Class> {
    let mut classes: Vec<Class> = Vec::new();
    for &i in valid {
        match classes.iter_mut().find(|c| values[c.first()] == values[i]) {
            Some(c) => c.members.push(i),
            None => classes.push(Class { members: vec![i] }),
        }
    }
    classes
}

/// Votes over `values` (run order). `tolerance_pct` applies to numeric tasks
/// only.
pub fn compute_consensus(
    values: &[Answer],
    task_type: TaskType,
    tolerance_pct: f64,
) -> Result<ConsensusOutcome, RunCountError> {
    let total = values.len();
    if !(usize::from(MIN_RUNS)..=usize::from(MAX_RUNS)).contains(&total) {
        return Err(RunCountError(total));
    }
    let valid: Vec<usize> = (0..total).filter(|&i| !values[i].is_na()).collect();
    if valid.is_empty() {
        return Ok(ConsensusOutcome {
            value: Answer::Na,
            reached: false,
            agreement_ratio: 0.0,
            runs: values.to_vec(),
        });
    }

    let numbers: Option<Vec<(usize, f64)>> = (task_type == TaskType::Numeric)
        .then(|| valid.iter().map(|&i| values[i].as_number().map(|v| (i, v))).collect())
        .flatten();
    let classes = match &numbers {
        Some(nums) => numeric_classes(nums, tolerance_pct.max(0.0)),
        None => exact_classes(values, &valid),
    };

    let winner = classes
        .iter()
        .min_by(|a, b| b.members.len().cmp(&a.members.len()).then(a.first().cmp(&b.first())))
        .expect("at least one valid run");

    let value = if numbers.is_some() {
        let mut xs: Vec<f64> = winner
            .members
            .iter()
            .filter_map(|&i| values[i].as_number())
            .collect();
        xs.sort_by(f64::total_cmp);
        Answer::Number(xs[(xs.len() - 1) / 2])
    } else {
        values[winner.first()].clone()
    };
    let agreement_ratio = winner.members.len() as f64 / total as f64;

    Ok(ConsensusOutcome {
        value,
        reached: agreement_ratio > 0.5,
        agreement_ratio,
        runs: values.to_vec(),
    })
}
