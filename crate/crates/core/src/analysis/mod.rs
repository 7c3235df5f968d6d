//! Evaluation metrics, fidelity reports and embeddings.

pub mod metrics;
pub mod report;
pub mod tsne;

pub use metrics::{classification_metrics, r_squared, silhouette, ClassificationMetrics, Confusion};
pub use report::{
    embedding_csv, evaluation_plan, fidelity_report, state_query_fidelity, BucketKey, BucketStat, EmbeddingRow, EvalReport,
    MarginalPredictor, StateScore, TaskMetric, TruthPredictor,
};
pub use tsne::{tsne_embed, TsneConfig, TsneResult};
