//! Aggregation of prompt positions into the six shared token groups.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenGroup {
    SubjectFirst,
    SubjectMiddle,
    SubjectLast,
    FirstSubsequent,
    Further,
    Last,
}

pub const ALL_GROUPS: [TokenGroup; 6] = [
    TokenGroup::SubjectFirst,
    TokenGroup::SubjectMiddle,
    TokenGroup::SubjectLast,
    TokenGroup::FirstSubsequent,
    TokenGroup::Further,
    TokenGroup::Last,
];

impl TokenGroup {
    pub fn label(self) -> &'static str {
        match self {
            TokenGroup::SubjectFirst => "subject_first",
            TokenGroup::SubjectMiddle => "subject_middle",
            TokenGroup::SubjectLast => "subject_last",
            TokenGroup::FirstSubsequent => "first_subsequent",
            TokenGroup::Further => "further",
            TokenGroup::Last => "last",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        ALL_GROUPS.iter().copied().find(|g| g.label() == s)
    }
}

/// Assigns every position to exactly one group.
///
/// Precedence: the final position is always `Last`, even if the subject
/// extends there; subject spans of length 1 map to `SubjectLast` and length
/// 2 to first+last; the position right after the subject is
/// `FirstSubsequent`; everything else, including positions before the
/// subject, is `Further`.
pub fn group_positions(seq_len: usize, span: (usize, usize)) -> Vec<TokenGroup> {
    assert!(span.0 < span.1 && span.1 <= seq_len, "bad span {span:?}");
    let mut assigned: Vec<Option<TokenGroup>> = vec![None; seq_len];
    assigned[seq_len - 1] = Some(TokenGroup::Last);

    let span_positions: Vec<usize> = (span.0..span.1).collect();
    let k = span_positions.len();
    for (i, &pos) in span_positions.iter().enumerate() {
        if assigned[pos].is_some() {
            continue;
        }
        let group = if k == 1 || i + 1 == k {
            TokenGroup::SubjectLast
        } else if i == 0 {
            TokenGroup::SubjectFirst
        } else {
            TokenGroup::SubjectMiddle
        };
        assigned[pos] = Some(group);
    }
    if span.1 < seq_len && assigned[span.1].is_none() {
        assigned[span.1] = Some(TokenGroup::FirstSubsequent);
    }
    assigned
        .into_iter()
        .map(|g| g.unwrap_or(TokenGroup::Further))
        .collect()
}
