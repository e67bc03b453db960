//! QA records and their JSONL format, the agreement metric, candidate
//! answer voting, and the question filters and taxonomies.

mod filters;
mod metric;
mod record;

pub use filters::{
    classify_answer_type, classify_question_type, is_color_answer, is_number_answer, reject_easy_question, AnswerType,
    KnownClasses, QuestionType, QuestionTypeLexicon, RejectionReason, COLOR_MAX_WORDS, COUNT_MAX_WORDS,
    EXISTENCE_MAX_WORDS,
};
pub use metric::{
    accuracy, accuracy_from_matches, build_answer_vocabulary, confidence_sums, correct_answers, soft_target,
    AnswerEvidence, AnswerVocabulary, MIN_ANSWER_OCCURRENCES,
};
pub use record::{
    canonicalize_answer, check_split_disjointness, parse_record, read_jsonl, write_jsonl, AnswerSubmission,
    Confidence, QaRecord, Split, Viewpoint,
};

/// The color lexicon shipped alongside the other lexicon files.
pub const COLOR_LEXICON: &str = include_str!("../../data/colors.txt");
