//! Locality transfer matrices for noisy layered quantum circuits.
//!
//! The crate computes how a channel moves Hilbert–Schmidt mass between
//! locality sectors, analyses the resulting non-negative matrices with
//! Perron–Frobenius machinery, and turns that into exact, asymptotic and
//! lower-bound formulas for the variance of a loss function over local
//! Haar-random parameters. A dense Monte Carlo simulator provides an
//! independent check of every formula.

pub mod basis;
pub mod channels;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod gates;
pub mod locality;
pub mod mc;
pub mod ltm;
pub mod normal_form;
pub mod operator;
pub mod partition;
pub mod spectral;
pub mod variance;

pub use basis::{enumerate_basis, LocalBasisElement, LocalFrame};
pub use channels::{Channel, ChannelKind};
pub use error::{Error, Result};
pub use locality::{weighted_dot, LocalityVector};
pub use ltm::{kraus_unravelling, ltm_exact, ltm_sampled, mean_ltm_over_ensemble, unravelling_excess, Ltm, LtmMethod, LtmOptions, Picture};
pub use normal_form::{normal_form, SingleQubitNormalForm};
pub use operator::{CMatrix, DenseOperator, C64};
pub use partition::{Locality, SubsystemPartition};
pub use spectral::{
    absorption, decompose, decompose_ltm, deep_limit_matrix, perron, period_of, CanonicalDecomposition,
    DeepLimit, IrreducibleBlock, PerronPair,
};
pub use variance::{
    lower_bound, noise_model_deep, variance_deep, variance_deep_unitary, variance_exact, VarianceMethod,
    VarianceReport,
};
pub use mc::{estimate_variance, haar_local_unitary, qresnet_estimate, LayeredCircuitSpec, MCEstimate, QResNetSpec};
