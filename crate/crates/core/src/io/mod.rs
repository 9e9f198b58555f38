//! Corpus ingestion and model persistence.

pub mod manifest;
pub mod model_file;
pub mod plt;
pub mod trace_csv;

pub use manifest::{load_corpus, CorpusManifest, ManifestEntry, TraceFormat};
pub use model_file::{
    load_clusters, load_model, load_model_as, save_clusters, save_model, ModelKind,
};
pub use plt::{parse_plt, read_geolife_dir, read_plt_user};
pub use trace_csv::{read_sequence, read_trace_csv, write_sequence, write_trace_csv, ColumnMap};
