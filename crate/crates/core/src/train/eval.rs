use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{resolve_scene, SceneBank, SceneSource};
use crate::dataset::{accuracy, classify_answer_type, classify_question_type, AnswerType, QaRecord, QuestionType, QuestionTypeLexicon};
use crate::error::Result;
use crate::fusion::Checkpoint;
use crate::linguistic::tokenize;

/// Accuracy over one slice of the test set. `accuracy` is `None` when the
/// slice is empty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalCell {
    pub count: usize,
    pub accuracy: Option<f64>,
}

#[derive(Default)]
struct Acc {
    count: usize,
    sum: f64,
}

impl Acc {
    fn add(&mut self, score: f64) {
        self.count += 1;
        self.sum += score;
    }

    fn cell(&self) -> EvalCell {
        let accuracy = (self.count > 0).then(|| self.sum / self.count as f64);
        EvalCell { count: self.count, accuracy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: EvalCell,
    /// Keyed by [`AnswerType::name`].
    pub answer_types: BTreeMap<String, EvalCell>,
    /// Keyed by [`QuestionType::name`].
    pub question_types: BTreeMap<String, EvalCell>,
    /// Questions that match no question-type keyword.
    pub untyped: EvalCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub answer: String,
    pub score: f64,
}

impl EvalReport {
    /// Aggregates per-question scores (aligned with `records`).
    pub fn from_scores(records: &[QaRecord], scores: &[f64], lexicon: &QuestionTypeLexicon) -> Self {
        assert_eq!(records.len(), scores.len(), "one score per record");
        let mut overall = Acc::default();
        let mut answer_types: BTreeMap<&str, Acc> = AnswerType::ALL.iter().map(|t| (t.name(), Acc::default())).collect();
        let mut question_types: BTreeMap<&str, Acc> =
            QuestionType::ALL.iter().map(|t| (t.name(), Acc::default())).collect();
        let mut untyped = Acc::default();
        for (r, &s) in records.iter().zip(scores) {
            overall.add(s);
            answer_types.get_mut(classify_answer_type(r).name()).expect("all types present").add(s);
            match classify_question_type(&r.question, lexicon) {
                Some(t) => question_types.get_mut(t.name()).expect("all types present").add(s),
                None => untyped.add(s),
            }
        }
        let cells = |m: BTreeMap<&str, Acc>| m.into_iter().map(|(k, a)| (k.to_string(), a.cell())).collect();
        EvalReport {
            overall: overall.cell(),
            answer_types: cells(answer_types),
            question_types: cells(question_types),
            untyped: untyped.cell(),
        }
    }

    pub fn answer_type(&self, t: AnswerType) -> EvalCell {
        self.answer_types.get(t.name()).copied().unwrap_or_default()
    }

    pub fn question_type(&self, t: QuestionType) -> EvalCell {
        self.question_types.get(t.name()).copied().unwrap_or_default()
    }
}

/// Argmax answer of every record, scored against its annotations.
pub fn predict_records(ckpt: &Checkpoint, records: &[QaRecord], bank: &SceneBank) -> Result<Vec<Prediction>> {
    let scenes = records.iter().map(|r| resolve_scene(r, bank, ckpt.ablation)).collect::<Result<Vec<_>>>()?;
    let source = SceneSource::new(&ckpt.model, bank, ckpt.ablation, false);
    records
        .par_iter()
        .zip(scenes)
        .map(|(r, scene)| {
            let tokens = tokenize(&r.question, &ckpt.tokens);
            let logits = ckpt.model.predict(&tokens, source.input(scene), ckpt.ablation)?;
            let best = argmax(&logits);
            let answer = ckpt.answers.answer(best).to_string();
            let score = accuracy(&answer, r);
            Ok(Prediction { question_id: r.question_id.clone(), answer, score })
        })
        .collect()
}

/// Index of the first maximal entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(
    ckpt: &Checkpoint,
    records: &[QaRecord],
    bank: &SceneBank,
    lexicon: &QuestionTypeLexicon,
) -> Result<EvalReport> {
    let preds = predict_records(ckpt, records, bank)?;
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    Ok(EvalReport::from_scores(records, &scores, lexicon))
}

/// Scores of answering every record with `answer`.
pub fn constant_scores(records: &[QaRecord], answer: &str) -> Vec<f64> {
    records.iter().map(|r| accuracy(answer, r)).collect()
}

fn pct(c: EvalCell) -> String {
    c.accuracy.map_or_else(|| "-".to_string(), |a| format!("{:.2}", 100.0 * a))
}

/// Plain-text table with one row per labeled report: answer-type columns,
/// question-type columns, then overall accuracy, all in percent. The last
/// row holds the question counts of the first report.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut header = vec!["Method".to_string()];
    let answer_cols = [AnswerType::Number, AnswerType::Color, AnswerType::YesNo, AnswerType::Other];
    header.extend(["Number", "Color", "Y/N", "Other"].map(String::from));
    header.extend(QuestionType::ALL.iter().map(|t| t.name().to_string()));
    header.push("Overall".into());

    let cells = |r: &EvalReport, f: &dyn Fn(EvalCell) -> String| {
        let mut v: Vec<String> = answer_cols.iter().map(|&t| f(r.answer_type(t))).collect();
        v.extend(QuestionType::ALL.iter().map(|&t| f(r.question_type(t))));
        v.push(f(r.overall));
        v
    };
    let mut table = vec![header];
    for (label, r) in rows {
        let mut line = vec![label.to_string()];
        line.extend(cells(r, &pct));
        table.push(line);
    }
    if let Some((_, first)) = rows.first() {
        let mut line = vec!["count".to_string()];
        line.extend(cells(first, &|c: EvalCell| c.count.to_string()));
        table.push(line);
    }
    let widths: Vec<usize> =
        (0..table[0].len()).map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &table {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
