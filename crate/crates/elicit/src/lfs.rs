//! Runs every configured labeling function over a corpus.
//!
//! Keyword and similarity LFs come from the core crate. Regex LFs and
//! external scorers live here because they need `regex` and HTTP. Documents
//! are processed in parallel; output order depends only on the corpus and
//! configuration. A failing LF abstains on that document and the failure
//! is reported, never raised.

use std::time::Duration;

use elicit_core::labeling::{process_external_response, ScoreRequest, ScoreResponse};
use elicit_core::labeling::{HashedEmbedder, LabelingError};
use elicit_core::pipeline::{run_native_lfs, LfFailure, LfRun};
use elicit_core::text::char_offset;
use elicit_core::{Candidate, Corpus, Document, LfKind, LfSpec, ProjectConfig, Span};
use rayon::prelude::*;
use regex::Regex;

/// Sends one request to an external scorer and parses the reply.
pub trait ScoreTransport: Sync {
    fn score(&self, endpoint: &str, request: &ScoreRequest, timeout: Duration) -> Result<ScoreResponse, LabelingError>;
}

/// JSON over HTTP POST.
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpTransport;

impl ScoreTransport for HttpTransport {
    fn score(&self, endpoint: &str, request: &ScoreRequest, timeout: Duration) -> Result<ScoreResponse, LabelingError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        let body = serde_json::to_string(request).expect("requests serialize");
        let mut resp = agent
            .post(endpoint)
            .header("Content-Type", "application/json")
            .send(&body)
            .map_err(|e| LabelingError::Transport(e.to_string()))?;
        let text = resp.body_mut().read_to_string().map_err(|e| LabelingError::Transport(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| LabelingError::Protocol(e.to_string()))
    }
}

/// Calls an external scorer with `retries` extra attempts on transport
/// errors. Protocol errors are not retried.
#[allow(clippy::too_many_arguments)]
pub fn call_external_lf(
    transport: &dyn ScoreTransport,
    lf_id: &str,
    doc: &Document,
    schema: &elicit_core::VariableSchema,
    endpoint: &str,
    k: usize,
    min_confidence: f64,
    retries: u32,
    timeout: Duration,
) -> Result<Vec<Candidate>, LabelingError> {
    let request = ScoreRequest::new(doc, schema, k);
    let mut attempt = 0;
    let response = loop {
        match transport.score(endpoint, &request, timeout) {
            Ok(r) => break r,
            Err(LabelingError::Transport(msg)) if attempt < retries => {
                attempt += 1;
                tracing::debug!(lf_id, doc_id = %doc.doc_id, attempt, "retrying: {msg}");
                std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
            }
            Err(e) => return Err(e),
        }
    };
    process_external_response(lf_id, doc, schema, &response, k, min_confidence)
}

/// Every match of `pattern` in the document, as character spans.
pub fn run_regex_lf(lf_id: &str, doc: &Document, variable_id: &str, value: &str, pattern: &Regex, confidence: f64) -> Vec<Candidate> {
    pattern
        .find_iter(&doc.text)
        .filter(|m| !m.is_empty())
        .map(|m| Candidate {
            lf_id: lf_id.to_string(),
            lf_kind: LfKind::Regex,
            variable_id: variable_id.to_string(),
            value: value.to_string(),
            confidence,
            raw_score: confidence,
            span: Span::new(doc.doc_id.clone(), char_offset(&doc.text, m.start()), char_offset(&doc.text, m.end())),
        })
        .collect()
}

fn failure(lf_id: &str, doc_id: &str, variable_id: Option<&str>, error: &LabelingError) -> LfFailure {
    tracing::warn!(lf_id, doc_id, ?variable_id, "labeling function abstained: {error}");
    LfFailure {
        lf_id: lf_id.to_string(),
        doc_id: doc_id.to_string(),
        variable_id: variable_id.map(Into::into),
        message: error.to_string(),
    }
}

fn run_document(config: &ProjectConfig, regexes: &[Option<Regex>], doc: &Document, transport: &dyn ScoreTransport) -> LfRun {
    let single = Corpus::from_documents([doc.clone()]).expect("one document");
    let mut run = run_native_lfs(config, &single, &HashedEmbedder::default());
    for (lf, re) in config.lf_configs.iter().zip(regexes) {
        match &lf.spec {
            LfSpec::Regex { variable_id, value, confidence, .. } => {
                let re = re.as_ref().expect("compiled above");
                run.candidates.extend(run_regex_lf(&lf.lf_id, doc, variable_id, value, re, *confidence));
            }
            LfSpec::External { endpoint, min_confidence, retries, timeout_ms } => {
                for var in &config.variables {
                    let timeout = Duration::from_millis(*timeout_ms);
                    match call_external_lf(transport, &lf.lf_id, doc, var, endpoint, config.k, *min_confidence, *retries, timeout) {
                        Ok(c) => run.candidates.extend(c),
                        Err(e) => run.failures.push(failure(&lf.lf_id, &doc.doc_id, Some(&var.variable_id), &e)),
                    }
                }
            }
            LfSpec::Keyword | LfSpec::Similarity { .. } => {}
        }
    }
    run
}

/// Runs all LFs of `config` over `corpus`.
pub fn run_all_lfs(config: &ProjectConfig, corpus: &Corpus, transport: &dyn ScoreTransport) -> Result<LfRun, regex::Error> {
    let regexes = config
        .lf_configs
        .iter()
        .map(|lf| match &lf.spec {
            LfSpec::Regex { pattern, .. } => Regex::new(pattern).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let runs: Vec<LfRun> = corpus.documents().par_iter().map(|d| run_document(config, &regexes, d, transport)).collect();
    let mut all = LfRun::default();
    for r in runs {
        all.extend(r);
    }
    Ok(all)
}
