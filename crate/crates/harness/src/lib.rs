pub mod check;
pub mod explore;
pub mod steps;
pub mod suites;
pub mod world;
