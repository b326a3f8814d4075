use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ItemKey, ItemStatus, SessionState};
use crate::corpus::Span;

/// Cell text for items nobody has decided yet.
pub const PENDING_CELL: &str = "<pending>";
/// Cell text for automatic labels where the model abstained.
pub const ABSTAIN_CELL: &str = "";

/// One row per document, one column per variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDecision {
    pub record_id: String,
    pub annotator_id: String,
    pub decision: String,
    pub value: Option<String>,
    pub group_id: Option<String>,
    pub wall_time_ms: u64,
    pub timestamp: u64,
}

/// Where a cell's value came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRow {
    pub doc_id: String,
    pub variable_id: String,
    pub value: String,
    pub status: ItemStatus,
    /// confirm, no_evidence, manual, auto or pending.
    pub source: String,
    pub group_id: Option<String>,
    pub group_confidence: Option<f64>,
    pub agreement: Option<usize>,
    pub annotator_id: Option<String>,
    pub span: Option<Span>,
    pub wall_time_ms: u64,
    pub disagreement: bool,
    /// Every decision on the cell, rejects included, in log order.
    pub decisions: Vec<CellDecision>,
}

impl SessionState {
    pub fn export_table(&self) -> ExportTable {
        let mut header = Vec::with_capacity(self.variables.len() + 1);
        header.push("doc_id".to_string());
        header.extend(self.variables.iter().map(|v| v.variable_id.clone()));
        let provenance = self.provenance();
        let mut cells = provenance.iter();
        let rows = self
            .doc_ids
            .iter()
            .map(|d| {
                let mut row = Vec::with_capacity(header.len());
                row.push(d.clone());
                row.extend(self.variables.iter().map(|_| cells.next().expect("one cell per item").value.clone()));
                row
            })
            .collect();
        ExportTable { header, rows }
    }

    /// One row per (document, variable) in queue order.
    pub fn provenance(&self) -> Vec<ProvenanceRow> {
        self.keys().iter().map(|k| self.provenance_row(k)).collect()
    }

    fn provenance_row(&self, key: &ItemKey) -> ProvenanceRow {
        let item = self.item(key).expect("key from roster");
        let decisions: Vec<CellDecision> = item
            .records
            .iter()
            .map(|&i| {
                let r = &self.validations[i];
                CellDecision {
                    record_id: r.record_id.clone(),
                    annotator_id: r.annotator_id.clone(),
                    decision: r.decision.as_str().to_string(),
                    value: self.record_value(r),
                    group_id: r.group_id.clone(),
                    wall_time_ms: r.wall_time_ms,
                    timestamp: r.timestamp,
                }
            })
            .collect();
        let distinct: BTreeSet<Option<String>> =
            self.terminal_records(key).into_iter().map(|r| self.record_value(r)).collect();
        let mut row = ProvenanceRow {
            doc_id: key.doc_id.clone(),
            variable_id: key.variable_id.clone(),
            value: PENDING_CELL.to_string(),
            status: item.status,
            source: "pending".to_string(),
            group_id: None,
            group_confidence: None,
            agreement: None,
            annotator_id: None,
            span: None,
            wall_time_ms: 0,
            disagreement: distinct.len() > 1,
            decisions,
        };
        if let Some(r) = self.resolved_record(key) {
            row.value = self.record_value(r).unwrap_or_default();
            row.source = r.decision.as_str().to_string();
            row.annotator_id = Some(r.annotator_id.clone());
            row.group_id = r.group_id.clone();
            row.wall_time_ms = item
                .records
                .iter()
                .map(|&i| &self.validations[i])
                .filter(|v| v.annotator_id == r.annotator_id)
                .map(|v| v.wall_time_ms)
                .sum();
        } else if let Some(auto) = &item.auto {
            row.value = auto.value.clone().unwrap_or_else(|| ABSTAIN_CELL.to_string());
            row.source = "auto".to_string();
            row.group_id = auto.group_id.clone();
        }
        if let Some(g) = row.group_id.as_ref().and_then(|g| self.groups.get(g)) {
            row.group_confidence = Some(g.group_confidence);
            row.agreement = Some(g.agreement);
            row.span = Some(g.merged_span.clone());
        }
        row
    }
}
