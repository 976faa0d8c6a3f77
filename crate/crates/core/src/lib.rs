pub mod error;
pub mod numerics;
pub mod series;
pub mod oracle;
pub mod reps;
pub mod identity;
pub mod report;
pub mod cli;
