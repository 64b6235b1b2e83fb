//! Ledger-backed oracle client for fully offline runs.
//!
//! Instead of calling a model, the oracle reads the corruption ledger:
//! detection requests are answered with the exact table of injected
//! errors, correction requests with the inverted (restored) text. Runs
//! through the same prompt/parse/back-match path as the HTTP client, so
//! it doubles as the ground-truth fixture for the whole detect/correct
//! pipeline.

use std::collections::HashMap;
use std::path::Path;

use crate::corrupt::{invert_plan, load_plans, CorruptionPlan};
use crate::error::{Error, Result};

use super::client::{ChatClient, ChatRequest};
use super::prompt::{CORRECTION_BASE, DETECTION_BASE};

pub struct OracleClient {
    plans: HashMap<String, CorruptionPlan>,
}

impl OracleClient {
    pub fn new(plans: impl IntoIterator<Item = CorruptionPlan>) -> Self {
        OracleClient {
            plans: plans.into_iter().map(|p| (p.instance_id.clone(), p)).collect(),
        }
    }

    pub fn from_ledger(path: &Path) -> Result<Self> {
        Ok(Self::new(load_plans(path)?))
    }

    fn plan(&self, instance_id: &str) -> Result<&CorruptionPlan> {
        self.plans.get(instance_id).ok_or_else(|| Error::Llm {
            instance_id: instance_id.to_string(),
            message: "no ledger entry for instance".into(),
        })
    }
}

fn escape_cell(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the plan's errors as the detection-table response, rows in
/// post-corruption stream order.
fn detection_table(plan: &CorruptionPlan) -> String {
    let removed: Vec<usize> = plan.merge_sites.iter().map(|m| m.left_index + 1).collect();
    let post_index = |o: usize| o - removed.iter().filter(|&&r| r < o).count();
    let mut rows: Vec<(usize, String, String)> = Vec::with_capacity(plan.n_errors());
    for m in &plan.merge_sites {
        rows.push((
            post_index(m.left_index),
            format!("{}{}", m.left, m.right),
            format!("{} {}", m.left, m.right),
        ));
    }
    for e in &plan.misspell_edits {
        rows.push((post_index(e.token_index), e.corrupted.clone(), e.original.clone()));
    }
    rows.sort_by_key(|(i, _, _)| *i);
    let mut body = String::new();
    for (_, err, corr) in rows {
        body.push_str(&format!(
            " <tr> <td>{}</td> <td>{}</td> </tr>",
            escape_cell(&err),
            escape_cell(&corr)
        ));
    }
    format!(
        "<table border=\"1\"> <thead> <tr> <th>Tokens with Errors</th> \
<th>Corrected Tokens</th> </tr> </thead> <tbody>{body} </tbody> </table>"
    )
}

impl ChatClient for OracleClient {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String> {
        let plan = self.plan(request.instance_id)?;
        if request.prompt.starts_with(DETECTION_BASE) {
            Ok(detection_table(plan))
        } else if request.prompt.starts_with(CORRECTION_BASE) {
            if plan.is_empty() {
                return Ok("nil".to_string());
            }
            invert_plan(request.instance_text, plan)
        } else {
            Err(Error::Llm {
                instance_id: request.instance_id.to_string(),
                message: "oracle cannot answer this prompt".into(),
            })
        }
    }
}
