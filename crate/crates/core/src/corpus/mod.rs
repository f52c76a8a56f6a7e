//! Corpus assembly: listening triplets, mood annotations, catalog linkage,
//! reproducible splits and descriptive statistics.

mod annotations;
mod interactions;
mod linkage;
mod splits;
mod stats;

pub use annotations::{
    parse_annotations, parse_annotations_reader, unfold_album_tags, write_annotations,
    TagAnnotations, TagVocabulary, UnfoldedTags,
};
pub use interactions::{
    parse_triplets, parse_triplets_reader, InteractionMatrix, ParsedTriplets, RejectedLine,
};
pub use linkage::{
    canonicalize, link_catalogs, name_similarity, track_similarity, LinkMatch, LinkReport, Track,
    DEFAULT_MAX_DURATION_DELTA, DEFAULT_MIN_NAME_SIMILARITY,
};
pub use splits::{make_splits, DatasetSplit, SplitName, TEST_FILE, TRAIN_FILE, VAL_FILE};
pub use stats::{corpus_stats, CorpusStats, Summary, TagCount};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate tag {0:?} in vocabulary")]
    DuplicateTag(String),
    #[error("duplicate track id {0:?}")]
    DuplicateTrack(String),
    #[error("{0}")]
    Invalid(String),
}
