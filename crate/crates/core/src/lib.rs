//! Principal curvature lines on surfaces: umbilic points, their normal forms
//! and bifurcations, separatrices, principal cycles and one-parameter sweeps.

pub mod expr;
pub mod foliation;
pub mod geometry;
pub mod lift;
pub mod ode;
pub mod report;
pub mod sweep;
pub mod umbilic;

pub use expr::{Expr, ExprError, Jet};
pub use geometry::{Domain, Foliation, GeomError, Surface};
