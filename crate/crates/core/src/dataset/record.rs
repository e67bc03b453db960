use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Yes,
    Maybe,
    No,
}

impl Confidence {
    pub fn weight(self) -> f64 {
        match self {
            Confidence::Yes => 1.0,
            Confidence::Maybe => 0.5,
            Confidence::No => 0.0,
        }
    }
}

/// Camera pose an annotator answered from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSubmission {
    pub text: String,
    pub confidence: Confidence,
    pub annotator_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewpoint: Option<Viewpoint>,
}

impl AnswerSubmission {
    /// Keeps `text` as written; fails if its canonical form is empty.
    pub fn new(text: &str, confidence: Confidence, annotator_id: impl Into<String>) -> Result<Self> {
        if canonicalize_answer(text).is_empty() {
            return Err(Error::Validation(format!("answer {text:?} is empty after canonicalization")));
        }
        Ok(AnswerSubmission { text: text.to_string(), confidence, annotator_id: annotator_id.into(), viewpoint: None })
    }

    /// The form used for matching and voting.
    pub fn canonical(&self) -> String {
        canonicalize_answer(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub question_id: String,
    pub scene_id: String,
    pub question: String,
    pub answers: Vec<AnswerSubmission>,
    pub split: Split,
}

/// Lowercase, trim, collapse internal whitespace, drop one leading
/// article (`a`, `an`, `the`).
pub fn canonicalize_answer(text: &str) -> String {
    let lower = text.to_lowercase();
    let mut words: Vec<&str> = lower.split_whitespace().collect();
    if words.len() > 1 && matches!(words[0], "a" | "an" | "the") {
        words.remove(0);
    }
    words.join(" ")
}

fn validate(record: &QaRecord, line: usize) -> Result<()> {
    if record.question_id.is_empty() || record.scene_id.is_empty() {
        return Err(Error::Parse { line, message: "question_id and scene_id must be nonempty".into() });
    }
    for a in &record.answers {
        if a.canonical().is_empty() {
            return Err(Error::Parse { line, message: format!("answer {:?} is empty after canonicalization", a.text) });
        }
    }
    Ok(())
}

/// Reads one record per line. Blank lines are skipped; answer texts are
/// canonicalized.
pub fn read_jsonl(path: &Path) -> Result<Vec<QaRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

pub fn parse_record(line: &str, line_no: usize) -> Result<QaRecord> {
    let r: QaRecord =
        serde_json::from_str(line).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
    validate(&r, line_no)?;
    Ok(r)
}

pub fn write_jsonl(path: &Path, records: &[QaRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fails when one scene appears in more than one split.
pub fn check_split_disjointness(records: &[QaRecord]) -> Result<()> {
    let mut seen: HashMap<&str, Split> = HashMap::new();
    for r in records {
        if let Some(prev) = seen.insert(&r.scene_id, r.split) {
            if prev != r.split {
                return Err(Error::Validation(format!(
                    "scene {} appears in both {prev} and {} splits",
                    r.scene_id, r.split
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(canonicalize_answer("  The   Red  Chair "), "red chair");
        assert_eq!(canonicalize_answer("An apple"), "apple");
        assert_eq!(canonicalize_answer("a"), "a");
        assert_eq!(canonicalize_answer("YES"), "yes");
        assert_eq!(canonicalize_answer("the the end"), "the end");
    }

    #[test]
    fn confidence_weights() {
        assert_eq!(Confidence::Yes.weight(), 1.0);
        assert_eq!(Confidence::Maybe.weight(), 0.5);
        assert_eq!(Confidence::No.weight(), 0.0);
    }

    #[test]
    fn submission_rejects_blank_text() {
        assert!(AnswerSubmission::new("   ", Confidence::Yes, "a1").is_err());
    }

    #[test]
    fn json_field_names() {
        let r = QaRecord {
            question_id: "q1".into(),
            scene_id: "s1".into(),
            question: "What color is the chair?".into(),
            answers: vec![AnswerSubmission::new("red", Confidence::Maybe, "w7").unwrap()],
            split: Split::Val,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(
            s,
            r#"{"question_id":"q1","scene_id":"s1","question":"What color is the chair?","answers":[{"text":"red","confidence":"maybe","annotator_id":"w7"}],"split":"val"}"#
        );
        assert_eq!(parse_record(&s, 1).unwrap(), r);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_record("{not json", 12) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_disjointness() {
        let mk = |scene: &str, split| QaRecord {
            question_id: format!("{scene}-{split}"),
            scene_id: scene.into(),
            question: "q".into(),
            answers: vec![],
            split,
        };
        assert!(check_split_disjointness(&[mk("a", Split::Train), mk("a", Split::Train), mk("b", Split::Test)]).is_ok());
        assert!(check_split_disjointness(&[mk("a", Split::Train), mk("a", Split::Test)]).is_err());
    }
}
