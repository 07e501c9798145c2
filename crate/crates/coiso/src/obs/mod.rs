//! Observable expressions over chart coordinates and model fields.

mod expr;
mod registry;

pub use expr::{compile, parse, Builtin, Expr, Op};
pub use registry::Registry;
