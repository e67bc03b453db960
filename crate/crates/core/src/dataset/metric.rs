use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;

use super::{canonicalize_answer, QaRecord, Split};
use crate::error::{Error, Result};

/// Agreement-based accuracy of one answer: half credit per matching
/// annotator, saturating at two.
pub fn accuracy(answer: &str, record: &QaRecord) -> f64 {
    let a = canonicalize_answer(answer);
    let matches = record.answers.iter().filter(|s| s.canonical() == a).count();
    accuracy_from_matches(matches)
}

pub fn accuracy_from_matches(matches: usize) -> f64 {
    (matches as f64 / 2.0).min(1.0)
}

/// Summed confidence weight per canonical answer text.
pub fn confidence_sums(record: &QaRecord) -> BTreeMap<String, f64> {
    let mut sums = BTreeMap::new();
    for s in &record.answers {
        *sums.entry(s.canonical()).or_insert(0.0) += s.confidence.weight();
    }
    sums
}

/// Every answer whose summed confidence equals the maximum, alphabetical.
pub fn correct_answers(record: &QaRecord) -> Vec<String> {
    let sums = confidence_sums(record);
    let Some(max) = sums.values().copied().reduce(f64::max) else {
        return Vec::new();
    };
    sums.into_iter().filter(|(_, v)| *v == max).map(|(k, _)| k).collect()
}

/// An answer must be correct in more than this many training questions to
/// enter the vocabulary.
pub const MIN_ANSWER_OCCURRENCES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerEvidence {
    /// Training questions in which the answer is a correct answer.
    pub count: usize,
    /// Confidence sums of the answer across those questions.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnswerVocabulary {
    answers: Vec<String>,
    evidence: BTreeMap<String, AnswerEvidence>,
}

impl AnswerVocabulary {
    pub fn from_answers(answers: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for a in &answers {
            if !seen.insert(a) {
                return Err(Error::Validation(format!("duplicate answer {a:?}")));
            }
        }
        Ok(AnswerVocabulary { answers, evidence: BTreeMap::new() })
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn answer(&self, idx: usize) -> &str {
        &self.answers[idx]
    }

    pub fn index_of(&self, answer: &str) -> Option<usize> {
        let a = canonicalize_answer(answer);
        self.answers.iter().position(|x| *x == a)
    }

    pub fn evidence(&self) -> &BTreeMap<String, AnswerEvidence> {
        &self.evidence
    }

    /// One answer per line, in index order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        for a in &self.answers {
            s.push_str(a);
            s.push('\n');
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_answers(text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
    }
}

/// Candidate answers from the training split: answers that are correct in
/// more than [`MIN_ANSWER_OCCURRENCES`] questions, most frequent first,
/// ties alphabetical. Records from other splits are skipped unread.
pub fn build_answer_vocabulary(records: &[QaRecord]) -> AnswerVocabulary {
    let mut evidence: BTreeMap<String, AnswerEvidence> = BTreeMap::new();
    for r in records.iter().filter(|r| r.split == Split::Train) {
        let sums = confidence_sums(r);
        for a in correct_answers(r) {
            let e = evidence.entry(a.clone()).or_insert(AnswerEvidence { count: 0, confidence: 0.0 });
            e.count += 1;
            e.confidence += sums[&a];
        }
    }
    evidence.retain(|_, e| e.count > MIN_ANSWER_OCCURRENCES);
    let mut answers: Vec<String> = evidence.keys().cloned().collect();
    answers.sort_by(|a, b| evidence[b].count.cmp(&evidence[a].count).then_with(|| a.cmp(b)));
    if answers.is_empty() {
        warn!("answer vocabulary is empty: no answer is correct in more than {MIN_ANSWER_OCCURRENCES} training questions");
    }
    AnswerVocabulary { answers, evidence }
}

/// Soft training target: each in-vocabulary answer weighted by its
/// accuracy on the record, normalized to sum 1. `None` when no annotated
/// answer is in the vocabulary.
pub fn soft_target(record: &QaRecord, vocab: &AnswerVocabulary) -> Option<Vec<f64>> {
    let mut t = vec![0.0; vocab.len()];
    for (i, a) in vocab.answers().iter().enumerate() {
        t[i] = accuracy(a, record);
    }
    let sum: f64 = t.iter().sum();
    if sum == 0.0 {
        return None;
    }
    t.iter_mut().for_each(|v| *v /= sum);
    Some(t)
}
