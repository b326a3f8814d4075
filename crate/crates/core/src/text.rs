//! Text helpers shared by the labeling functions and the corpus.
//!
//! All offsets in this crate are *character* offsets (Unicode scalar values),
//! which is what external scorers written in other languages report.

use alloc::string::String;
use alloc::vec::Vec;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a sequence of byte slices, each followed by a 0xff
/// separator so that `["ab", "c"]` and `["a", "bc"]` hash differently.
pub fn fnv1a64<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> u64 {
    let mut hash = FNV_OFFSET;
    for part in parts {
        for &byte in part {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(FNV_PRIME);
        }
        hash ^= 0xff;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Sentence terminators used for splitting and for context snapping.
pub fn is_sentence_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '\n')
}

/// Character-level equality ignoring case.
pub fn eq_ignore_case(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Alphanumeric tokens of `text`, lowercased, with their character spans.
pub fn tokens(text: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut idx = 0;
    for c in text.chars() {
        if is_word_char(c) {
            if current.is_empty() {
                start = idx;
            }
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push((start, idx, core::mem::take(&mut current)));
        }
        idx += 1;
    }
    if !current.is_empty() {
        out.push((start, idx, current));
    }
    out
}

/// Splits `text` into sentences and returns their trimmed character spans.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace (or the end of
/// the text), or at a newline. Empty sentences are dropped.
pub fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 0..chars.len() {
        let c = chars[i];
        let ends = c == '\n'
            || (matches!(c, '.' | '!' | '?')
                && chars.get(i + 1).map_or(true, |n| n.is_whitespace()));
        if ends {
            push_trimmed(&chars, start, i + 1, &mut spans);
            start = i + 1;
        }
    }
    push_trimmed(&chars, start, chars.len(), &mut spans);
    spans
}

fn push_trimmed(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<(usize, usize)>) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if start < end {
        out.push((start, end));
    }
}

/// Byte offset of the `char_idx`-th character (or `text.len()` past the end).
pub fn byte_offset(text: &str, char_idx: usize) -> usize {
    text.char_indices()
        .nth(char_idx)
        .map_or(text.len(), |(b, _)| b)
}

/// Substring by character offsets `[start, end)`.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let b0 = byte_offset(text, start);
    let b1 = b0 + byte_offset(&text[b0..], end.saturating_sub(start));
    &text[b0..b1]
}

/// Character offset corresponding to byte offset `byte` (which must lie on a
/// char boundary).
pub fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Normalizes `\r\n` and lone `\r` to `\n`.
pub fn normalize_newlines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\r' {
            if chars.peek() == Some(&'\n') {
                chars.next();
            }
            out.push('\n');
        } else {
            out.push(c);
        }
    }
    out
}
