//! Rejection patterns for trivially answerable questions, the keyword
//! question-type taxonomy, and the answer-type rule.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{correct_answers, QaRecord};
use crate::appearance::{is_color_name, COLOR_ANSWER_SEPARATOR};
use crate::error::{Error, Result};

const KNOWN_OBJECTS: &str = include_str!("../../data/known_objects.txt");
const KNOWN_SCENES: &str = include_str!("../../data/known_scenes.txt");
const QUESTION_TYPES: &str = include_str!("../../data/question_types.tsv");

fn parse_lines(text: &str) -> Vec<String> {
    text.lines().map(|l| l.trim().to_lowercase()).filter(|l| !l.is_empty()).collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Known object and scene classes used by the rejection patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownClasses {
    pub objects: Vec<String>,
    pub scenes: Vec<String>,
}

impl Default for KnownClasses {
    fn default() -> Self {
        KnownClasses { objects: parse_lines(KNOWN_OBJECTS), scenes: parse_lines(KNOWN_SCENES) }
    }
}

impl KnownClasses {
    /// One class per line in each file.
    pub fn load(objects: &Path, scenes: &Path) -> Result<Self> {
        Ok(KnownClasses { objects: parse_lines(&read_text(objects)?), scenes: parse_lines(&read_text(scenes)?) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    Existence,
    Count,
    Color,
    SceneType,
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectionReason::Existence => "existence",
            RejectionReason::Count => "count",
            RejectionReason::Color => "color",
            RejectionReason::SceneType => "scene_type",
        })
    }
}

/// Existence questions are only rejected below this many words.
pub const EXISTENCE_MAX_WORDS: usize = 8;
pub const COUNT_MAX_WORDS: usize = 9;
pub const COLOR_MAX_WORDS: usize = 6;

/// Lowercased whitespace tokens with surrounding ASCII punctuation removed.
fn pattern_tokens(q: &str) -> Vec<String> {
    q.split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Whether `tokens` starts with `class`, allowing an `s`/`es` plural on the
/// final word.
fn starts_with_class(tokens: &[String], class: &str) -> bool {
    let parts: Vec<&str> = class.split_whitespace().collect();
    if parts.is_empty() || tokens.len() < parts.len() {
        return false;
    }
    let last = parts.len() - 1;
    parts.iter().enumerate().all(|(i, p)| {
        let t = tokens[i].as_str();
        if i < last {
            t == *p
        } else {
            t == *p || t.strip_suffix('s') == Some(p) || t.strip_suffix("es") == Some(p)
        }
    })
}

fn any_class(tokens: &[String], classes: &[String]) -> bool {
    classes.iter().any(|c| starts_with_class(tokens, c))
}

/// First matching rejection pattern, checked in the order existence, count,
/// color, scene type. Word counts are taken on whitespace tokens of `q`.
pub fn reject_easy_question(q: &str, known: &KnownClasses) -> Option<RejectionReason> {
    let words = q.split_whitespace().count();
    let t = pattern_tokens(q);
    let at = |i: usize| t.get(i).map(String::as_str).unwrap_or("");

    if words < EXISTENCE_MAX_WORDS
        && matches!(at(0), "is" | "are")
        && at(1) == "there"
        && matches!(at(2), "a" | "an" | "any" | "some")
        && any_class(&t[3..], &known.objects)
    {
        return Some(RejectionReason::Existence);
    }
    if words < COUNT_MAX_WORDS && at(0) == "how" && at(1) == "many" && any_class(&t[2..], &known.objects) {
        return Some(RejectionReason::Count);
    }
    if words < COLOR_MAX_WORDS
        && at(0) == "what"
        && matches!(at(1), "color" | "colour")
        && matches!(at(2), "is" | "are")
        && at(3) == "the"
        && any_class(&t[4..], &known.objects)
    {
        return Some(RejectionReason::Color);
    }
    if at(0) == "is" && matches!(at(1), "it" | "this") {
        let mut i = 2;
        if matches!(at(i), "scene" | "scan" | "room") {
            i += 1;
        }
        if matches!(at(i), "a" | "an") && any_class(&t[i + 1..], &known.scenes) {
            return Some(RejectionReason::SceneType);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionType {
    #[serde(rename = "spatial")]
    Spatial,
    #[serde(rename = "compare-avg")]
    CompareAvg,
    #[serde(rename = "placement")]
    Placement,
    #[serde(rename = "viewpoint")]
    Viewpoint,
    #[serde(rename = "aggregation")]
    Aggregation,
}

impl QuestionType {
    /// Matching precedence.
    pub const ALL: [QuestionType; 5] = [
        QuestionType::Spatial,
        QuestionType::CompareAvg,
        QuestionType::Placement,
        QuestionType::Viewpoint,
        QuestionType::Aggregation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuestionType::Spatial => "spatial",
            QuestionType::CompareAvg => "compare-avg",
            QuestionType::Placement => "placement",
            QuestionType::Viewpoint => "viewpoint",
            QuestionType::Aggregation => "aggregation",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionTypeLexicon {
    lists: [Vec<String>; 5],
}

impl Default for QuestionTypeLexicon {
    fn default() -> Self {
        Self::parse(QUESTION_TYPES).expect("bundled lexicon parses")
    }
}

impl QuestionTypeLexicon {
    /// Lines of `type<TAB>keyword`. Keywords keep their spaces, which
    /// matter for entries such as ` go `.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lists: [Vec<String>; 5] = Default::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (ty, kw) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse { line: i + 1, message: "expected type<TAB>keyword".into() })?;
            let ty = QuestionType::from_name(ty.trim())
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("unknown question type {ty:?}") })?;
            if kw.trim().is_empty() {
                return Err(Error::Parse { line: i + 1, message: "empty keyword".into() });
            }
            lists[ty as usize].push(kw.to_lowercase());
        }
        Ok(QuestionTypeLexicon { lists })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn keywords(&self, ty: QuestionType) -> &[String] {
        &self.lists[ty as usize]
    }
}

/// Lowercased text with ASCII punctuation turned into spaces, whitespace
/// collapsed, and one space of padding on each side.
fn padded(q: &str) -> String {
    let cleaned: String = q.to_lowercase().chars().map(|c| if c.is_ascii_punctuation() { ' ' } else { c }).collect();
    format!(" {} ", cleaned.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// At most one type: keywords without spaces match whole words, keywords
/// with spaces match as written inside the padded question. Types are tried
/// in [`QuestionType::ALL`] order.
pub fn classify_question_type(q: &str, lexicon: &QuestionTypeLexicon) -> Option<QuestionType> {
    let text = padded(q);
    let words: Vec<&str> = text.split_whitespace().collect();
    QuestionType::ALL.into_iter().find(|&ty| {
        lexicon.keywords(ty).iter().any(|kw| {
            if kw.contains(' ') {
                text.contains(kw.as_str())
            } else {
                words.contains(&kw.as_str())
            }
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    YesNo,
    Color,
    Number,
    Other,
}

impl AnswerType {
    pub const ALL: [AnswerType; 4] = [AnswerType::YesNo, AnswerType::Color, AnswerType::Number, AnswerType::Other];

    pub fn name(self) -> &'static str {
        match self {
            AnswerType::YesNo => "yes_no",
            AnswerType::Color => "color",
            AnswerType::Number => "number",
            AnswerType::Other => "other",
        }
    }
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const NUMERALS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

pub fn is_number_answer(a: &str) -> bool {
    a.parse::<i64>().is_ok() || NUMERALS.contains(&a)
}

/// A single color name, or color names joined with `" and "`.
pub fn is_color_answer(a: &str) -> bool {
    a.split(COLOR_ANSWER_SEPARATOR).all(is_color_name)
}

/// Answer type from the record's correct answers: yes/no, then number,
/// then color; anything else (or no answers) is `Other`.
pub fn classify_answer_type(record: &QaRecord) -> AnswerType {
    let correct = correct_answers(record);
    if correct.is_empty() {
        return AnswerType::Other;
    }
    let all = |f: &dyn Fn(&str) -> bool| correct.iter().all(|a| f(a));
    if all(&|a| a == "yes" || a == "no") {
        AnswerType::YesNo
    } else if all(&is_number_answer) {
        AnswerType::Number
    } else if all(&is_color_answer) {
        AnswerType::Color
    } else {
        AnswerType::Other
    }
}

#[cfg(test)]
mod tests {
    use super::super::{AnswerSubmission, Confidence, Split};
    use super::*;

    fn known() -> KnownClasses {
        KnownClasses::default()
    }

    #[test]
    fn existence_pattern() {
        assert_eq!(reject_easy_question("Is there a cabinet?", &known()), Some(RejectionReason::Existence));
        assert_eq!(reject_easy_question("Are there any chairs here?", &known()), Some(RejectionReason::Existence));
        assert_eq!(
            reject_easy_question("Is there a cabinet to the left of the blue armchair near the window?", &known()),
            None
        );
        assert_eq!(reject_easy_question("Is there a unicorn?", &known()), None);
    }

    #[test]
    fn count_pattern() {
        assert_eq!(reject_easy_question("How many chairs are in the room?", &known()), Some(RejectionReason::Count));
        assert_eq!(
            reject_easy_question("How many chairs are in the room by the big window?", &known()),
            None
        );
    }

    #[test]
    fn color_pattern() {
        assert_eq!(reject_easy_question("What color is the bed?", &known()), Some(RejectionReason::Color));
        assert_eq!(reject_easy_question("What colour are the doors?", &known()), Some(RejectionReason::Color));
        assert_eq!(reject_easy_question("What color is the bed by the door?", &known()), None);
    }

    #[test]
    fn scene_type_pattern() {
        assert_eq!(reject_easy_question("Is this a bedroom?", &known()), Some(RejectionReason::SceneType));
        assert_eq!(
            reject_easy_question("Is this room a living room or something else entirely?", &known()),
            Some(RejectionReason::SceneType)
        );
        assert_eq!(reject_easy_question("Is it an office?", &known()), Some(RejectionReason::SceneType));
        assert_eq!(reject_easy_question("Is it a spaceship?", &known()), None);
    }

    #[test]
    fn bundled_lexicon_sizes() {
        let lex = QuestionTypeLexicon::default();
        assert_eq!(lex.keywords(QuestionType::Spatial).len(), 42);
        assert_eq!(lex.keywords(QuestionType::CompareAvg).len(), 6);
        assert_eq!(lex.keywords(QuestionType::Placement).len(), 16);
        assert_eq!(lex.keywords(QuestionType::Viewpoint).len(), 14);
        assert_eq!(lex.keywords(QuestionType::Aggregation).len(), 18);
        assert!(lex.keywords(QuestionType::Viewpoint).contains(&" go ".to_string()));
        assert!(lex.keywords(QuestionType::Aggregation).contains(&" every".to_string()));
    }

    #[test]
    fn question_types() {
        let lex = QuestionTypeLexicon::default();
        assert_eq!(classify_question_type("How big is the table?", &lex), Some(QuestionType::Spatial));
        assert_eq!(
            classify_question_type("Is the desk higher than the average table?", &lex),
            Some(QuestionType::Spatial)
        );
        assert_eq!(classify_question_type("What is the name of this room?", &lex), None);
        assert_eq!(classify_question_type("Is this a large scene?", &lex), Some(QuestionType::CompareAvg));
        assert_eq!(classify_question_type("Where can I go to wash?", &lex), Some(QuestionType::Viewpoint));
        assert_eq!(classify_question_type("Is everything tidy?", &lex), Some(QuestionType::Aggregation));
        // "by" is a whole word, not a substring of "baby".
        assert_eq!(classify_question_type("Where is the baby seat?", &lex), None);
    }

    fn rec(answers: &[&str]) -> QaRecord {
        QaRecord {
            question_id: "q".into(),
            scene_id: "s".into(),
            question: "?".into(),
            answers: answers.iter().map(|a| AnswerSubmission::new(a, Confidence::Yes, "x").unwrap()).collect(),
            split: Split::Test,
        }
    }

    #[test]
    fn answer_types() {
        assert_eq!(classify_answer_type(&rec(&["yes"])), AnswerType::YesNo);
        assert_eq!(classify_answer_type(&rec(&["3"])), AnswerType::Number);
        assert_eq!(classify_answer_type(&rec(&["three"])), AnswerType::Number);
        assert_eq!(classify_answer_type(&rec(&["red", "maroon"])), AnswerType::Color);
        assert_eq!(classify_answer_type(&rec(&["red and blue"])), AnswerType::Color);
        assert_eq!(classify_answer_type(&rec(&["red", "3"])), AnswerType::Other);
        assert_eq!(classify_answer_type(&rec(&["bed"])), AnswerType::Other);
        assert_eq!(classify_answer_type(&rec(&[])), AnswerType::Other);
    }

    #[test]
    fn lexicon_parse_errors() {
        assert!(QuestionTypeLexicon::parse("spatial big").is_err());
        assert!(QuestionTypeLexicon::parse("shape\tbig").is_err());
    }
}
