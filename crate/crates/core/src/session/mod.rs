//! Event-sourced validation session.
//!
//! Every mutation is a [`SessionEvent`]; the state is a pure fold over the
//! event log, so replaying a log reproduces the state exactly.

mod deferral;
mod export;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Span};
use crate::labeling::ExplanationGroup;
use crate::labelmodel::{majority_rule, rank_explanations};
use crate::schema::{DeferralPolicy, VariableSchema};

pub use deferral::{budget_size, plan_deferral, DeferralPlan};
pub use export::{CellDecision, ExportTable, ProvenanceRow, ABSTAIN_CELL, PENDING_CELL};

/// Version tag for persisted event logs.
pub const EVENT_LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemKey {
    pub doc_id: String,
    pub variable_id: String,
}

impl ItemKey {
    pub fn new(doc_id: impl Into<String>, variable_id: impl Into<String>) -> Self {
        Self { doc_id: doc_id.into(), variable_id: variable_id.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Decision {
    Confirm,
    Reject,
    NoEvidence,
    Manual { value: String },
}

impl Decision {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Decision::Reject)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Confirm => "confirm",
            Decision::Reject => "reject",
            Decision::NoEvidence => "no_evidence",
            Decision::Manual { .. } => "manual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationRecord {
    pub record_id: String,
    pub doc_id: String,
    pub variable_id: String,
    /// Set for confirm and reject; `None` for no-evidence and manual entries.
    #[serde(default)]
    pub group_id: Option<String>,
    pub decision: Decision,
    pub annotator_id: String,
    #[serde(default)]
    pub wall_time_ms: u64,
    /// Milliseconds since the Unix epoch, supplied by the caller.
    #[serde(default)]
    pub timestamp: u64,
}

impl ValidationRecord {
    pub fn key(&self) -> ItemKey {
        ItemKey::new(self.doc_id.clone(), self.variable_id.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Pending,
    DeferredToHuman,
    AutoAccepted,
    Validated,
}

impl ItemStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemStatus::Pending => "pending",
            ItemStatus::DeferredToHuman => "deferred_to_human",
            ItemStatus::AutoAccepted => "auto_accepted",
            ItemStatus::Validated => "validated",
        }
    }
}

/// Which annotator's value fills a cell decided by several people.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    #[default]
    FirstWins,
    LastWins,
}

/// Value assigned without a human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoLabel {
    pub key: ItemKey,
    /// `None` when the model abstains.
    pub value: Option<String>,
    pub group_id: Option<String>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub doc_id: String,
    pub variable_id: String,
    pub group_id: String,
    pub value: String,
    /// Batch of groups that surfaced the new candidate.
    pub batch: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Opened {
        variables: Vec<VariableSchema>,
        doc_ids: Vec<String>,
        #[serde(default)]
        conflict_policy: ConflictPolicy,
    },
    GroupsLoaded {
        /// `None` when groups are ranked without a fitted label model.
        fit_version: Option<u64>,
        groups: Vec<ExplanationGroup>,
    },
    DeferralPlanned {
        policy: DeferralPolicy,
        human: Vec<ItemKey>,
        auto: Vec<AutoLabel>,
    },
    Validation(ValidationRecord),
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("session is closed")]
    SessionClosed,
    #[error("session has not been opened")]
    NotOpened,
    #[error("{annotator_id} already decided {doc_id}/{variable_id}")]
    StaleItem { doc_id: String, variable_id: String, annotator_id: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemState {
    pub status: ItemStatus,
    /// Current ranking, best first.
    pub ranked: Vec<String>,
    /// Every group id ever loaded for this item.
    pub seen: BTreeSet<String>,
    pub auto: Option<AutoLabel>,
    /// Indices into the validation log.
    pub records: Vec<usize>,
}

/// A group as shown to the annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupView {
    pub group_id: String,
    pub value: String,
    pub confidence: f64,
    pub agreement: usize,
    pub lf_ids: Vec<String>,
    pub snippet: String,
    pub span: Span,
    pub member_spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextItem {
    pub doc_id: String,
    pub variable_id: String,
    pub display_name: String,
    pub label_values: Vec<String>,
    pub status: ItemStatus,
    /// Ranked groups, minus any this annotator already rejected.
    pub groups: Vec<GroupView>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub pending: usize,
    pub deferred_to_human: usize,
    pub auto_accepted: usize,
    pub validated: usize,
    pub alerts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub opened: bool,
    pub closed: bool,
    pub variables: Vec<VariableSchema>,
    pub doc_ids: Vec<String>,
    pub conflict_policy: ConflictPolicy,
    /// doc id → variable id → item.
    pub items: BTreeMap<String, BTreeMap<String, ItemState>>,
    /// Latest copy of every group ever loaded.
    pub groups: BTreeMap<String, ExplanationGroup>,
    pub fit_version: Option<u64>,
    pub batches: u64,
    pub deferral: Option<DeferralPolicy>,
    pub validations: Vec<ValidationRecord>,
    pub alerts: Vec<Alert>,
    pub log: Vec<SessionEvent>,
}

impl SessionState {
    pub fn open(variables: Vec<VariableSchema>, doc_ids: Vec<String>, conflict_policy: ConflictPolicy) -> Result<Self, SessionError> {
        let mut state = Self::default();
        state.apply(SessionEvent::Opened { variables, doc_ids, conflict_policy })?;
        Ok(state)
    }

    /// Rebuilds a session from its event log. On failure, returns the index
    /// of the offending event.
    pub fn replay(events: impl IntoIterator<Item = SessionEvent>) -> Result<Self, (usize, SessionError)> {
        let mut state = Self::default();
        for (i, event) in events.into_iter().enumerate() {
            state.apply(event).map_err(|e| (i, e))?;
        }
        Ok(state)
    }

    pub fn variable(&self, variable_id: &str) -> Option<&VariableSchema> {
        self.variables.iter().find(|v| v.variable_id == variable_id)
    }

    pub fn item(&self, key: &ItemKey) -> Option<&ItemState> {
        self.items.get(&key.doc_id)?.get(&key.variable_id)
    }

    fn item_mut(&mut self, key: &ItemKey) -> Option<&mut ItemState> {
        self.items.get_mut(&key.doc_id)?.get_mut(&key.variable_id)
    }

    /// Items in queue order: documents in corpus order, variables in schema
    /// order.
    pub fn keys(&self) -> Vec<ItemKey> {
        self.doc_ids
            .iter()
            .flat_map(|d| self.variables.iter().map(move |v| ItemKey::new(d.clone(), v.variable_id.clone())))
            .collect()
    }

    /// Ranked groups currently attached to an item.
    pub fn ranked_groups(&self, key: &ItemKey) -> Vec<&ExplanationGroup> {
        self.item(key)
            .map(|it| it.ranked.iter().filter_map(|g| self.groups.get(g)).collect())
            .unwrap_or_default()
    }

    pub fn load_groups(&mut self, fit_version: Option<u64>, groups: Vec<ExplanationGroup>) -> Result<Vec<Alert>, SessionError> {
        let before = self.alerts.len();
        self.apply(SessionEvent::GroupsLoaded { fit_version, groups })?;
        Ok(self.alerts[before..].to_vec())
    }

    /// Best confidence per undecided item, in queue order. Items without
    /// groups have confidence 0.
    pub fn predictions(&self) -> Vec<(ItemKey, f64)> {
        self.keys()
            .into_iter()
            .filter(|k| self.item(k).is_some_and(|it| it.status != ItemStatus::Validated))
            .map(|k| {
                let c = self.ranked_groups(&k).first().map_or(0.0, |g| g.group_confidence);
                (k, c)
            })
            .collect()
    }

    /// The value automation would assign: the top-ranked group under a fit,
    /// majority rule otherwise.
    pub fn auto_label(&self, key: &ItemKey) -> AutoLabel {
        let ranked = self.ranked_groups(key);
        let negative = self.variable(&key.variable_id).and_then(|v| v.negative_value.as_deref());
        let top = if self.fit_version.is_some() {
            ranked.first().copied()
        } else {
            let owned: Vec<ExplanationGroup> = ranked.iter().map(|g| (*g).clone()).collect();
            majority_rule(&owned, None).and_then(|v| ranked.iter().copied().find(|g| g.value == v))
        };
        match top {
            Some(g) => AutoLabel {
                key: key.clone(),
                value: Some(g.value.clone()),
                group_id: Some(g.group_id.clone()),
                confidence: g.group_confidence,
            },
            None => AutoLabel { key: key.clone(), value: negative.map(String::from), group_id: None, confidence: 0.0 },
        }
    }

    pub fn plan_deferral(&mut self, policy: DeferralPolicy) -> Result<DeferralPlan, SessionError> {
        self.check_writable()?;
        let plan = plan_deferral(&self.predictions(), &policy);
        let auto = plan.auto.iter().map(|k| self.auto_label(k)).collect();
        self.apply(SessionEvent::DeferralPlanned { policy, human: plan.human.clone(), auto })?;
        Ok(plan)
    }

    pub fn submit_validation(&mut self, record: ValidationRecord) -> Result<(), SessionError> {
        self.apply(SessionEvent::Validation(record))
    }

    pub fn close(&mut self) -> Result<(), SessionError> {
        self.apply(SessionEvent::Closed)
    }

    fn check_writable(&self) -> Result<(), SessionError> {
        if !self.opened {
            return Err(SessionError::NotOpened);
        }
        if self.closed {
            return Err(SessionError::SessionClosed);
        }
        Ok(())
    }

    /// Validates `event`, folds it into the state and appends it to the log.
    pub fn apply(&mut self, event: SessionEvent) -> Result<(), SessionError> {
        if let SessionEvent::Opened { .. } = event {
            if self.opened {
                return Err(SessionError::InvalidEvent("session already opened".into()));
            }
        } else {
            self.check_writable()?;
        }
        let logged = match &event {
            SessionEvent::Opened { variables, doc_ids, conflict_policy } => {
                self.on_opened(variables, doc_ids, *conflict_policy)?;
                true
            }
            SessionEvent::GroupsLoaded { fit_version, groups } => {
                self.on_groups(*fit_version, groups)?;
                true
            }
            SessionEvent::DeferralPlanned { policy, human, auto } => {
                self.on_deferral(policy, human, auto)?;
                true
            }
            SessionEvent::Validation(record) => self.on_validation(record)?,
            SessionEvent::Closed => {
                self.closed = true;
                true
            }
        };
        if logged {
            self.log.push(event);
        }
        Ok(())
    }

    fn on_opened(&mut self, variables: &[VariableSchema], doc_ids: &[String], policy: ConflictPolicy) -> Result<(), SessionError> {
        let unique_vars: BTreeSet<&str> = variables.iter().map(|v| v.variable_id.as_str()).collect();
        let unique_docs: BTreeSet<&str> = doc_ids.iter().map(String::as_str).collect();
        if unique_vars.len() != variables.len() || unique_docs.len() != doc_ids.len() {
            return Err(SessionError::InvalidEvent("duplicate document or variable id".into()));
        }
        self.opened = true;
        self.variables = variables.to_vec();
        self.doc_ids = doc_ids.to_vec();
        self.conflict_policy = policy;
        for d in doc_ids {
            let per_doc = self.items.entry(d.clone()).or_default();
            for v in variables {
                per_doc.insert(
                    v.variable_id.clone(),
                    ItemState { status: ItemStatus::Pending, ranked: Vec::new(), seen: BTreeSet::new(), auto: None, records: Vec::new() },
                );
            }
        }
        Ok(())
    }

    fn on_groups(&mut self, fit_version: Option<u64>, groups: &[ExplanationGroup]) -> Result<(), SessionError> {
        let mut by_item: BTreeMap<ItemKey, Vec<ExplanationGroup>> = BTreeMap::new();
        for g in groups {
            let key = ItemKey::new(g.doc_id.clone(), g.variable_id.clone());
            if self.item(&key).is_none() {
                return Err(SessionError::InvalidEvent(format!("group {} belongs to unknown item {}/{}", g.group_id, g.doc_id, g.variable_id)));
            }
            by_item.entry(key).or_default().push(g.clone());
        }
        self.batches += 1;
        let batch = self.batches;
        self.fit_version = fit_version;
        for key in self.keys() {
            let ranked = by_item.remove(&key).map(|gs| rank_explanations(&gs)).unwrap_or_default();
            let item = self.item_mut(&key).expect("key from roster");
            let mut fresh = Vec::new();
            for g in &ranked {
                if item.seen.insert(g.group_id.clone()) && item.status == ItemStatus::Validated {
                    fresh.push(Alert {
                        doc_id: key.doc_id.clone(),
                        variable_id: key.variable_id.clone(),
                        group_id: g.group_id.clone(),
                        value: g.value.clone(),
                        batch,
                    });
                }
            }
            item.ranked = ranked.iter().map(|g| g.group_id.clone()).collect();
            self.alerts.extend(fresh);
            for g in ranked {
                self.groups.insert(g.group_id.clone(), g);
            }
        }
        Ok(())
    }

    fn on_deferral(&mut self, policy: &DeferralPolicy, human: &[ItemKey], auto: &[AutoLabel]) -> Result<(), SessionError> {
        for key in human.iter().chain(auto.iter().map(|a| &a.key)) {
            match self.item(key) {
                None => return Err(SessionError::InvalidEvent(format!("unknown item {}/{}", key.doc_id, key.variable_id))),
                Some(it) if it.status == ItemStatus::Validated => {
                    return Err(SessionError::InvalidEvent(format!("item {}/{} is already validated", key.doc_id, key.variable_id)))
                }
                Some(_) => {}
            }
        }
        self.deferral = Some(*policy);
        for key in human {
            let it = self.item_mut(key).expect("checked");
            it.status = ItemStatus::DeferredToHuman;
            it.auto = None;
        }
        for a in auto {
            let it = self.item_mut(&a.key).expect("checked");
            it.status = ItemStatus::AutoAccepted;
            it.auto = Some(a.clone());
        }
        Ok(())
    }

    /// Returns whether the record was new (and so belongs in the log).
    fn on_validation(&mut self, record: &ValidationRecord) -> Result<bool, SessionError> {
        if let Some(prev) = self.validations.iter().find(|r| r.record_id == record.record_id) {
            return if prev == record {
                Ok(false)
            } else {
                Err(SessionError::InvalidRecord(format!("record id {} reused with different content", record.record_id)))
            };
        }
        let key = record.key();
        let var = self
            .variable(&record.variable_id)
            .ok_or_else(|| SessionError::InvalidRecord(format!("unknown variable {}", record.variable_id)))?;
        let item = self
            .item(&key)
            .ok_or_else(|| SessionError::InvalidRecord(format!("unknown document {}", record.doc_id)))?;
        if record.record_id.is_empty() || record.annotator_id.is_empty() {
            return Err(SessionError::InvalidRecord("record_id and annotator_id must be non-empty".into()));
        }
        match &record.decision {
            Decision::Confirm | Decision::Reject => {
                let gid = record
                    .group_id
                    .as_deref()
                    .ok_or_else(|| SessionError::InvalidRecord("confirm and reject need a group_id".into()))?;
                if !item.seen.contains(gid) {
                    return Err(SessionError::InvalidRecord(format!("group {gid} does not belong to {}/{}", key.doc_id, key.variable_id)));
                }
            }
            Decision::NoEvidence => {
                if record.group_id.is_some() {
                    return Err(SessionError::InvalidRecord("no_evidence takes no group_id".into()));
                }
            }
            Decision::Manual { value } => {
                if !var.has_value(value) {
                    return Err(SessionError::InvalidRecord(format!("{value} is not a value of {}", var.variable_id)));
                }
                if record.group_id.is_some() {
                    return Err(SessionError::InvalidRecord("manual entries take no group_id".into()));
                }
            }
        }
        if item.status == ItemStatus::AutoAccepted {
            return Err(SessionError::InvalidRecord(format!("{}/{} was accepted automatically", key.doc_id, key.variable_id)));
        }
        if self.terminal_decision(&key, &record.annotator_id).is_some() {
            return Err(SessionError::StaleItem {
                doc_id: key.doc_id,
                variable_id: key.variable_id,
                annotator_id: record.annotator_id.clone(),
            });
        }
        let idx = self.validations.len();
        self.validations.push(record.clone());
        let item = self.item_mut(&key).expect("checked");
        item.records.push(idx);
        if record.decision.is_terminal() {
            item.status = ItemStatus::Validated;
        }
        Ok(true)
    }

    /// First terminal decision `annotator` made on `key`.
    pub fn terminal_decision(&self, key: &ItemKey, annotator: &str) -> Option<&ValidationRecord> {
        self.item(key)?
            .records
            .iter()
            .map(|&i| &self.validations[i])
            .find(|r| r.annotator_id == annotator && r.decision.is_terminal())
    }

    /// Value a terminal record assigns.
    pub fn record_value(&self, record: &ValidationRecord) -> Option<String> {
        match &record.decision {
            Decision::Confirm => record.group_id.as_ref().and_then(|g| self.groups.get(g)).map(|g| g.value.clone()),
            Decision::NoEvidence => self.variable(&record.variable_id).map(|v| v.no_evidence_value().to_string()),
            Decision::Manual { value } => Some(value.clone()),
            Decision::Reject => None,
        }
    }

    /// Terminal records on `key`, one per annotator, in log order.
    pub fn terminal_records(&self, key: &ItemKey) -> Vec<&ValidationRecord> {
        let mut seen = BTreeSet::new();
        self.item(key)
            .map(|it| {
                it.records
                    .iter()
                    .map(|&i| &self.validations[i])
                    .filter(|r| r.decision.is_terminal() && seen.insert(r.annotator_id.as_str()))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Human-resolved value of `key` under the conflict policy.
    pub fn resolved_record(&self, key: &ItemKey) -> Option<&ValidationRecord> {
        let records = self.terminal_records(key);
        match self.conflict_policy {
            ConflictPolicy::FirstWins => records.first().copied(),
            ConflictPolicy::LastWins => records.last().copied(),
        }
    }

    /// Final value of every item: human decisions first, then automatic
    /// labels. Undecided items are absent; abstentions map to `None`.
    pub fn final_values(&self) -> BTreeMap<ItemKey, Option<String>> {
        let mut out = BTreeMap::new();
        for key in self.keys() {
            if let Some(r) = self.resolved_record(&key) {
                out.insert(key, self.record_value(r));
            } else if let Some(auto) = self.item(&key).and_then(|it| it.auto.as_ref()) {
                out.insert(key, auto.value.clone());
            }
        }
        out
    }

    /// Human-annotated values only, per annotator.
    pub fn annotator_values(&self, annotator: &str) -> BTreeMap<ItemKey, Option<String>> {
        self.keys()
            .into_iter()
            .filter_map(|k| {
                let r = self.terminal_decision(&k, annotator)?;
                let v = self.record_value(r);
                Some((k, v))
            })
            .collect()
    }

    /// Next item needing a decision from `annotator`, or `None` when done.
    pub fn next_item(&self, corpus: &Corpus, annotator: &str) -> Result<Option<NextItem>, SessionError> {
        self.check_writable()?;
        for key in self.keys() {
            let item = self.item(&key).expect("key from roster");
            if item.status == ItemStatus::AutoAccepted || self.terminal_decision(&key, annotator).is_some() {
                continue;
            }
            let rejected: BTreeSet<&str> = item
                .records
                .iter()
                .map(|&i| &self.validations[i])
                .filter(|r| r.annotator_id == annotator && r.decision == Decision::Reject)
                .filter_map(|r| r.group_id.as_deref())
                .collect();
            let var = self.variable(&key.variable_id).expect("key from roster");
            let groups = self
                .ranked_groups(&key)
                .into_iter()
                .filter(|g| !rejected.contains(g.group_id.as_str()))
                .map(|g| group_view(corpus, g))
                .collect();
            return Ok(Some(NextItem {
                doc_id: key.doc_id,
                variable_id: key.variable_id,
                display_name: var.display_name.clone(),
                label_values: var.label_values.clone(),
                status: item.status,
                groups,
            }));
        }
        Ok(None)
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress { alerts: self.alerts.len(), ..Progress::default() };
        for item in self.items.values().flat_map(|m| m.values()) {
            p.total += 1;
            match item.status {
                ItemStatus::Pending => p.pending += 1,
                ItemStatus::DeferredToHuman => p.deferred_to_human += 1,
                ItemStatus::AutoAccepted => p.auto_accepted += 1,
                ItemStatus::Validated => p.validated += 1,
            }
        }
        p
    }

    /// Groups with a confirm or reject decision, for calibration and the
    /// refit penalty.
    pub fn decided_groups(&self) -> Vec<(&ExplanationGroup, bool)> {
        self.validations
            .iter()
            .filter_map(|r| {
                let confirmed = match r.decision {
                    Decision::Confirm => true,
                    Decision::Reject => false,
                    _ => return None,
                };
                Some((self.groups.get(r.group_id.as_deref()?)?, confirmed))
            })
            .collect()
    }
}

fn group_view(corpus: &Corpus, g: &ExplanationGroup) -> GroupView {
    let snippet = corpus
        .get(&g.doc_id)
        .filter(|d| d.check_span(&g.merged_span).is_ok())
        .map(|d| d.span_text(&g.merged_span).to_string())
        .unwrap_or_default();
    let mut member_spans: Vec<Span> = g.members.iter().map(|c| c.span.clone()).collect();
    member_spans.sort();
    member_spans.dedup();
    GroupView {
        group_id: g.group_id.clone(),
        value: g.value.clone(),
        confidence: g.group_confidence,
        agreement: g.agreement,
        lf_ids: g.lf_ids().into_iter().map(String::from).collect(),
        snippet,
        span: g.merged_span.clone(),
        member_spans,
    }
}
