//! Uncertainty quantification for coupled electrothermal simulations.

pub mod cache;
pub mod error;
pub mod fit;
pub mod quadrature;
pub mod sparse_grid;
pub mod tensor_train;
pub mod uq;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/sparse-grids.md")]
    mod sparse_grids {}
    #[doc = include_str!("../../../book/src/tensor-trains.md")]
    mod tensor_trains {}
    #[doc = include_str!("../../../book/src/electrothermal-model.md")]
    mod electrothermal_model {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/campaigns.md")]
    mod campaigns {}
}
