use alloc::string::ToString;
use alloc::vec::Vec;

use super::Candidate;
use crate::corpus::{Document, Span};
use crate::schema::{LfKind, VariableSchema};
use crate::text::eq_ignore_case;

/// Nominal score given to every keyword hit.
pub const KEYWORD_CONFIDENCE: f64 = 1.0;

/// Case-insensitive whole-word keyword lookup.
///
/// Every hit becomes a candidate spanning the matched text; keyword hits are
/// never trimmed by top-K. A keyword boundary is only enforced on sides where
/// the keyword itself starts or ends with an alphanumeric character, so `Mr.`
/// matches before a space and `man` does not match inside `manager`.
pub fn run_keyword_lf(lf_id: &str, doc: &Document, schema: &VariableSchema) -> Vec<Candidate> {
    let chars: Vec<char> = doc.text.chars().collect();
    let mut hits: Vec<(usize, usize, &str)> = Vec::new();
    for (value, keywords) in &schema.keywords {
        for keyword in keywords {
            let kw: Vec<char> = keyword.trim().chars().collect();
            if kw.is_empty() || kw.len() > chars.len() {
                continue;
            }
            let need_left = kw[0].is_alphanumeric();
            let need_right = kw[kw.len() - 1].is_alphanumeric();
            for start in 0..=chars.len() - kw.len() {
                let end = start + kw.len();
                if need_left && start > 0 && chars[start - 1].is_alphanumeric() {
                    continue;
                }
                if need_right && end < chars.len() && chars[end].is_alphanumeric() {
                    continue;
                }
                if chars[start..end].iter().zip(&kw).all(|(&a, &b)| eq_ignore_case(a, b)) {
                    hits.push((start, end, value.as_str()));
                }
            }
        }
    }
    hits.sort_unstable();
    hits.dedup();
    hits.into_iter()
        .map(|(start, end, value)| Candidate {
            lf_id: lf_id.to_string(),
            lf_kind: LfKind::Keyword,
            variable_id: schema.variable_id.clone(),
            value: value.to_string(),
            confidence: KEYWORD_CONFIDENCE,
            raw_score: KEYWORD_CONFIDENCE,
            span: Span::new(doc.doc_id.clone(), start, end),
        })
        .collect()
}
