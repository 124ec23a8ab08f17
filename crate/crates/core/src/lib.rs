pub mod bisample;
pub mod curve;
pub mod gauge;
pub mod gridsearch;
pub mod model;
pub mod selfcheck;
pub mod solve;
pub mod sweep;
