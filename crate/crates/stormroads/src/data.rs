//! Bundled default data files, embedded at compile time so the binary can
//! run without external assets. Any of these can be overridden by a
//! config path pointing at a file of the same format.

pub const STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const LEMMAS: &str = include_str!("../data/lemmas.tsv");
pub const RELEVANCE: &str = include_str!("../data/relevance.txt");
pub const SENTIMENT_LEXICON: &str = include_str!("../data/sentiment_lexicon.tsv");
pub const BOOSTERS: &str = include_str!("../data/boosters.tsv");
pub const NEGATORS: &str = include_str!("../data/negators.txt");

/// Simplified state boundary used as the default study region.
pub const OKLAHOMA_REGION: &str = include_str!("../data/oklahoma.geojson");

/// Post-text template pools for the synthetic scenario generator, ordered
/// from calm to distressed.
pub const POOL_NEUTRAL: &str = include_str!("../data/pool_neutral.txt");
pub const POOL_POSITIVE: &str = include_str!("../data/pool_positive.txt");
pub const POOL_NEGATIVE_MILD: &str = include_str!("../data/pool_negative_mild.txt");
pub const POOL_NEGATIVE_STRONG: &str = include_str!("../data/pool_negative_strong.txt");
