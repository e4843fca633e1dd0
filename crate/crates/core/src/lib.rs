//! Single-model uncertainty estimates for neural networks.
//!
//! * [`sqr`]: simultaneous quantile regression. One network `f(x, τ)` trained
//!   on the pinball loss with a fresh random quantile level per example, giving
//!   every conditional quantile and hence prediction intervals (aleatoric
//!   uncertainty).
//! * [`certs`]: orthonormal certificates. A near-orthonormal linear map `C`
//!   trained to send in-domain features to zero; `‖Cᵀφ(x)‖²` scores how far a
//!   query is from the training distribution (epistemic uncertainty).
//!
//! Supporting modules provide the network substrate ([`net`]), baselines,
//! metrics, dataset handling, and bivariate causal-direction scoring.

pub mod baselines;
pub mod causal;
pub mod certs;
pub mod data;
pub mod error;
pub mod metrics;
pub mod net;
pub mod rng;
pub mod sqr;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/pinball.md")]
    mod pinball {}
    #[doc = include_str!("../../../book/src/intervals.md")]
    mod intervals {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/tail_bounds.md")]
    mod tail_bounds {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/causal.md")]
    mod causal {}
}
