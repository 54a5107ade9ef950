//! Coarse (block-affine) scrambling for digital and Halton sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`field_poly`]: prime fields, polynomials over them, small matrices.
//! * [`sequences`]: generalized Niederreiter, Sobol' and Halton points as digit arrays.
//! * [`scramble`]: affine and block-affine matrix scrambles.
//! * [`equidist`]: elementary-interval counting and net checks.
//! * [`gain`]: exact gain coefficients and their closed forms.
//! * [`anova`]: nested ANOVA of cell-resolved integrands.
//! * [`rqmc`]: estimators, RMSE experiments and the exact variance identity.

pub mod anova;
pub mod equidist;
pub mod error;
pub mod field_poly;
pub mod gain;
pub mod rational;
pub mod rng;
pub mod rqmc;
pub mod scramble;
pub mod sequences;

pub use anova::GridFunction;
pub use error::{Error, Result};
pub use field_poly::{FieldMatrix, PolyKind, Polynomial, PrimeBase};
pub use rational::ExactRational;
pub use scramble::{ScrambleMode, ScrambleState, Scrambler};
pub use sequences::{DigitPoint, Family, MixedBase, Precision, Sequence, SequenceSpec};
