pub mod canonical;
pub mod graph;
pub mod mi;
pub mod nets;
pub mod numeric;
pub mod par;
pub mod plot;
pub mod synthgen;
pub mod trainer;
