//! End-to-end stages shared by the command-line tool and the tests.

mod config;
mod evaluate;
mod separate;
mod stages;

pub use config::{
    check_hash, ArraySection, BeamSection, CorpusSection, EvalSection, ModelSection,
    PipelineConfig, StftSection,
};
pub use evaluate::{
    mean_improvement, rows_csv, score_outputs, summarize, summary_csv, EvalRow, Evaluator, System,
    SystemSummary, Utterance,
};
pub use separate::{select, Candidates, Selection, Separation, Separator};
pub use stages::{
    beampattern_csv, checkpoint_meta, corpus_training_examples, design_bank_for, evaluate_corpus,
    generate_corpus, load_bank_for, load_corpus, load_model_for, train_model,
};
