//! Shared domain model for the GAIA school energy platform: metrics and their
//! wire scaling, building topology, the binary node frame codec, and the
//! visualization mappings used by the lab kit and the API.

pub mod error;
pub mod frame;
pub mod linelog;
pub mod metric;
pub mod reading;
pub mod replay;
pub mod topology;
pub mod viz;

pub use error::{ConfigError, FrameError, RangeError};
pub use frame::{decode_frame, encode_frame, NodeReport, Record};
pub use metric::Metric;
pub use reading::{Reading, ReadingKey, UploadBatch};
pub use topology::{
    Binding, Building, BuildingTopology, Deployment, Floor, NodeDescriptor, NodeKind, Orientation,
    Room,
};
pub use viz::{
    assess_comfort, led_color_for_temperature, ring_level, ComfortAssessment, ComfortBands, Dial,
    LedColor,
};
