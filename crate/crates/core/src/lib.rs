//! Career-trajectory scientometrics: doctoral interdisciplinarity, university
//! production rankings, subfield mobility, research alignment and the
//! regression suite used to relate them to faculty placement.

pub mod analysis;
pub mod corpus;
pub mod deviation;
pub mod interdisciplinarity;
pub mod linalg;
pub mod mobility;
pub mod ranking;
pub mod report;
pub mod similarity;
pub mod stats;
pub mod synth;
pub mod taxonomy;
