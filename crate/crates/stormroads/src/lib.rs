//! stormroads: batch pipeline turning geotagged crisis-period posts into
//! sentiment-weighted road-network centrality metrics.
//!
//! The flow is a fixed sequence of stages, each reading the previous
//! stage's file output: ingest and filter posts, score sentiment from a
//! lexicon, tessellate the scored points into influence polygons, tag road
//! segments with the sentiment of the polygon they fall in, then compare
//! unweighted and sentiment-weighted edge betweenness over the road graph.
//!
//! Numeric kernels (geometry, class breaks, centrality) are generic over
//! the scalar type; the pipeline instantiates them at `f64` via the
//! aliases below.

pub mod centrality;
pub mod data;
pub mod geom;
pub mod ingest;
pub mod num;
pub mod pipeline;
pub mod roadnet;
pub mod sentiment;
pub mod tessellate;
pub mod testkit;
pub mod textproc;

/// Errors surfaced by library stages. Fatal data problems and config
/// problems are distinguished so the binary can map them to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code this error maps to: 2 for configuration
    /// problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Concrete scalar used by the pipeline.
pub type Scalar = f64;

pub type Point = geom::Point2<Scalar>;
pub type Ring = geom::Ring<Scalar>;
pub type Polygon = geom::Polygon<Scalar>;
pub type MultiPolygon = geom::MultiPolygon<Scalar>;
pub type Bbox = geom::Bbox<Scalar>;
pub type LocalFrame = geom::LocalFrame<Scalar>;
