//! Numerical laboratory for horocycle and geodesic dynamics on convex-cocompact
//! hyperbolic surfaces `Γ\PSL(2,R)` with `Γ` a Schottky group.

pub mod density;
pub mod dynamics;
pub mod hypgeom;
pub mod measures;
pub mod schottky;
pub mod summation;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
