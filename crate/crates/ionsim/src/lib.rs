pub mod foundation;
pub mod linalg;
pub mod chain_statics;
pub mod spin_coupling;
pub mod spin_dynamics;
pub mod hopfield;
pub mod phonon_lattice;
pub mod fkim;
pub mod fock_engine;
pub mod relativity;
