//! Second-order photon correlation g2(0) of Gaussian light from the
//! symmetrically ordered moments of its Wigner function, cross-checked
//! against photon-number statistics, simulated coincidence counting and
//! simulated homodyne tomography, and used to infer optical loss.
//!
//! Quadratures follow `a = (x + i p)/√2`, so vacuum has variance 1/2.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod counting;
pub mod error;
pub mod fit;
pub mod fock;
pub mod format;
pub mod gaussian;
pub mod loss;
pub mod moments;
pub mod quadrature;
pub mod rng;
pub mod tomography;
