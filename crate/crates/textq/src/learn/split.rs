//! Group-aware train/test splitting.
//!
//! Subjects can contribute several instances (multiple events), so naive
//! row splitting would leak a subject's notes across the boundary. All
//! rows of a subject land on the same side.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::stream;

const MAX_ATTEMPTS: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Which reseeded attempt produced a valid split.
    pub attempt: u32,
}

/// Assigns whole subjects to the test side until the requested fraction
/// of rows is reached, reseeding up to 100 times until both labels appear
/// on both sides and the achieved fraction is within 5 points of target.
pub fn group_split(matrix: &FeatureMatrix, test_frac: f64, seed: u64) -> Result<GroupSplit> {
    matrix.validate()?;
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::Invalid(format!("test_frac {test_frac} outside (0, 1)")));
    }
    let n = matrix.n_rows();
    let has_both = |rows: &[usize]| {
        rows.iter().any(|&r| matrix.labels[r] == 1) && rows.iter().any(|&r| matrix.labels[r] == 0)
    };
    let all: Vec<usize> = (0..n).collect();
    if !has_both(&all) {
        return Err(Error::Invalid("both labels are required to split".into()));
    }

    // subjects in first-occurrence order with their row indices
    let mut subjects: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut index: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (row, group) in matrix.groups.iter().enumerate() {
        match index.get(group.as_str()) {
            Some(&i) => subjects[i].1.push(row),
            None => {
                index.insert(group, subjects.len());
                subjects.push((group, vec![row]));
            }
        }
    }
    if subjects.len() < 2 {
        return Err(Error::Invalid("need at least two subjects to split".into()));
    }

    let target = test_frac * n as f64;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream(seed, &format!("split:{attempt}"));
        let mut order: Vec<usize> = (0..subjects.len()).collect();
        order.shuffle(&mut rng);
        let mut test: Vec<usize> = Vec::new();
        for &s in &order {
            if (test.len() as f64) >= target {
                break;
            }
            test.extend_from_slice(&subjects[s].1);
        }
        let mut train: Vec<usize> = (0..n).filter(|r| !test.contains(r)).collect();
        let achieved = test.len() as f64 / n as f64;
        if (achieved - test_frac).abs() > 0.05
            || train.is_empty()
            || test.is_empty()
            || !has_both(&train)
            || !has_both(&test)
        {
            continue;
        }
        test.sort_unstable();
        train.sort_unstable();
        return Ok(GroupSplit { train, test, attempt });
    }
    Err(Error::SplitFailed(MAX_ATTEMPTS as usize))
}
