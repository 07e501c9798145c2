pub mod ed;
pub mod lattice;
pub mod monopole;
pub mod su2;
pub mod ym;
