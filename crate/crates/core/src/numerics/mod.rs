//! Scalar numerical building blocks shared by the solver modules.

pub mod interp;
pub mod quadrature;
pub mod roots;

pub use interp::{hermite_eval, monotone_slopes};
pub use quadrature::{gauss_kronrod, GaussLegendre, QuadResult};
pub use roots::{brent, golden_max};
