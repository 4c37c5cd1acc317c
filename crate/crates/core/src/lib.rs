//! # fastrack
//!
//! Offline precomputation of tracking error bounds (TEB) and optimal tracking
//! controllers for a high-fidelity *tracking model* chasing a simplified
//! *planning model*, plus an online closed-loop simulator that plans with the
//! simple model in a partially known obstacle world while the real system
//! provably stays inside the TEB.
//!
//! The offline side poses a pursuit-evasion game over the relative dynamics
//! between the two models and solves the associated Hamilton-Jacobi
//! variational inequality backward in time on a rectilinear grid
//! ([`hjsolver`]). Sublevel sets of the resulting value function are the TEBs;
//! its spatial gradient yields the optimal tracking controller ([`teb`]).
//! The online side ([`sim`]) runs the sense → augment → plan → track loop with
//! hybrid controller switching, using either a lattice shortest-path planner
//! or an RRT ([`planning`]).
//!
//! Built-in model pairs live in [`relsys::catalog`]; grids, interpolation and
//! the finite-difference stencils are in [`grid`]; obstacle worlds, sensing
//! and constraint augmentation in [`world`].
//!
//! With the `parallel` feature (default) the solver sweep runs node-parallel
//! on rayon; without it the same sweep runs sequentially and produces
//! bit-identical results.

pub mod error;
pub mod grid;
pub mod hjsolver;
pub mod planning;
pub mod relsys;
pub mod sim;
pub mod teb;
pub mod world;

pub use error::Error;

/// Size the global worker pool used by node-parallel sweeps. No-op without
/// the `parallel` feature or once the pool has been initialized.
pub fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}
