//! Corpus ingestion, training-sample generation, phone-synchronous
//! alignment, batching and the on-disk sample cache.

mod annotation;
mod batch;
pub mod cache;
mod corpus;
mod dict;
mod phsync;
mod samples;
pub mod toy;

pub use annotation::{PhoneAnnotation, PhoneInterval};
pub use batch::{make_batch, make_batch_padded, Alignment, Batch, FeatureItem};
pub use corpus::{load_corpus, CorpusEntry, CorpusIndex};
pub use dict::PhonemeDict;
pub use phsync::phsync_stretch;
pub use samples::{
    frame_labels, generate_samples, plan_samples, segment_words, word_runs, GeneratedSamples,
    SampleConfig, SamplePlan, TrainSample, Word,
};
