//! Acoustical-metric geometry: the metric itself and its truncation, the
//! space-time elliptic velocity split, variable-coefficient wave solving
//! with the superposition check, and null ray/frame machinery.

pub mod elliptic;
pub mod metric;
pub mod rays;
pub mod split;
pub mod wave;
