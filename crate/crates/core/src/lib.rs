//! Probabilistic electricity price forecasting from panels of point
//! forecasts: ARX point models over rolling windows, factor-based quantile
//! regression, coverage backtests and a battery trading evaluation.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod factor;
pub mod npit;
pub mod pipeline;
pub mod point;
pub mod prob;
pub mod quantile;
pub mod report;
pub mod stats;
pub mod synthetic;
pub mod timeseries;
pub mod trading;

pub use error::{Error, Result};
pub use config::{PipelineConfig, Preset};
pub use pipeline::Pipeline;
pub use point::{ForecastPanel, Market};
pub use prob::{IntervalSet, Method, QuantileSurface};
pub use timeseries::{HourlyPanel, HourlyValues, SeriesId};
