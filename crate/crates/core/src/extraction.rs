//! Recovering ranked item-id lists from free-form model output.
//!
//! The scan is numeric: every maximal run of ASCII digits is a candidate id.
//! Candidates are de-duplicated (first occurrence wins), checked against the
//! item universe `[1, N]`, and the valid ones are truncated to `K`. Invalid
//! candidates are kept as hallucinations and never truncated.
//!
//! Numbered lists are the one structural case handled specially: when the
//! output enumerates lines `1.`, `2.`, ... (or `1)`, `2)`, ...), those leading
//! enumerators are formatting and are skipped.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedList {
    pub user_id: u32,
    pub run_index: u32,
    pub items: Vec<u32>,
    /// Out-of-universe integers in scan order. Values too large for `u64`
    /// saturate to `u64::MAX`.
    pub hallucinated: Vec<u64>,
    /// Number of valid items before truncation to K.
    pub truncated_from: usize,
}

impl ExtractedList {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HallucinationStats {
    pub invalid_count: usize,
    pub total_predicted: usize,
    pub rate: f64,
}

/// Byte spans of leading enumerators to ignore, if `text` is a numbered list.
fn enumerator_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        let indent = body.len() - body.trim_start().len();
        let rest = &body[indent..];
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 0 {
            let after = &rest[digits..];
            let mut chars = after.chars();
            let marker = chars.next();
            let follow = chars.next();
            if matches!(marker, Some('.') | Some(')')) && follow.is_none_or(char::is_whitespace) {
                spans.push((offset + indent, offset + indent + digits));
            }
        }
        offset += line.len();
    }

    let counts_up = spans
        .iter()
        .enumerate()
        .all(|(i, &(start, end))| text[start..end].parse::<u64>().is_ok_and(|n| n == i as u64 + 1));
    if counts_up {
        spans
    } else {
        Vec::new()
    }
}

/// Every maximal digit run in `text`, as integers in scan order.
pub fn scan_integers(text: &str) -> Vec<u64> {
    let skip = enumerator_spans(text);
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if skip.iter().any(|&(s, _)| s == start) {
            continue;
        }
        let value = text[start..i].parse::<u64>().unwrap_or(u64::MAX);
        out.push(value);
    }
    out
}

/// Dedupe, range-check and truncate an already-parsed id sequence.
pub fn validate_ids(
    candidates: impl IntoIterator<Item = u64>,
    universe_size: u32,
    k: usize,
    user_id: u32,
    run_index: u32,
) -> ExtractedList {
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    let mut hallucinated = Vec::new();
    for id in candidates {
        if !seen.insert(id) {
            continue;
        }
        if (1..=u64::from(universe_size)).contains(&id) {
            items.push(id as u32);
        } else {
            hallucinated.push(id);
        }
    }
    let truncated_from = items.len();
    items.truncate(k);
    ExtractedList {
        user_id,
        run_index,
        items,
        hallucinated,
        truncated_from,
    }
}

pub fn extract_and_validate(
    raw_text: &str,
    universe_size: u32,
    k: usize,
    user_id: u32,
    run_index: u32,
) -> ExtractedList {
    validate_ids(scan_integers(raw_text), universe_size, k, user_id, run_index)
}

pub fn hallucination_rate<'a>(lists: impl IntoIterator<Item = &'a ExtractedList>) -> HallucinationStats {
    let (invalid_count, total_predicted) = lists.into_iter().fold((0, 0), |(bad, total), l| {
        (bad + l.hallucinated.len(), total + l.items.len() + l.hallucinated.len())
    });
    let rate = if total_predicted > 0 {
        invalid_count as f64 / total_predicted as f64
    } else {
        0.0
    };
    HallucinationStats {
        invalid_count,
        total_predicted,
        rate,
    }
}
