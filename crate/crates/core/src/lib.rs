pub mod bounds;
pub mod data;
pub mod datasets;
pub mod inference;
pub mod lp;
pub mod oracle;
pub mod polyhedra;
pub mod response;
