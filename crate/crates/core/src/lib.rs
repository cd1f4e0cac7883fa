//! Critical shortlisting: factors proposed by a language model, each paired
//! with a critique of itself, applied to a table through a small filter
//! language and combined into a weighted ranking.

pub mod dataset;
pub mod factor;
pub mod filter;
pub mod llm;
pub mod profile;
pub mod replay;
pub mod session;
pub mod shortlist;

pub use dataset::{load_csv, ColumnType, Dataset, Digest, LoadError, RowId};
pub use factor::{Factor, FactorAnalysis, FactorId, FactorStatus, Importance, Weight};
pub use filter::{parse_filter, FilterExpr};
pub use llm::{ChatProvider, Gateway, LlmCall, LlmError, ProviderConfig};
pub use replay::{Interceptor, Mode, Scenario};
pub use session::{autostart, Session, SessionError};
pub use shortlist::{compute_global_shortlist, GlobalShortlist, Shade};
