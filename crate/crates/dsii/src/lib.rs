//! Fourier pseudospectral solver for Davey-Stewartson II type systems (the
//! hyperbolic-elliptic family, including the hyperbolic cubic NLS) with a
//! blow-up diagnostics toolkit: singularity tracing from Fourier-coefficient
//! asymptotics, blow-up-rate fitting via a downhill simplex, and
//! dynamical-rescaling post-processing.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values in
// input validation; index loops over co-indexed mode arrays read better than
// zipped iterator chains in the FFT-stage kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod diagnose;
/// The user guide (the `book/` directory), embedded so its code examples run
/// as doc-tests and can never drift from the library.
pub mod guide {
    #![doc = include_str!("../../../book/src/introduction.md")]

    #[doc = include_str!("../../../book/src/getting-started.md")]
    pub mod getting_started {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    pub mod spectral {}
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/integration.md")]
    pub mod integration {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub mod diagnostics {}
    #[doc = include_str!("../../../book/src/io-formats.md")]
    pub mod io_formats {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
pub mod error;
pub mod integrate;
pub mod io;
pub mod model;
pub mod optimize;
pub mod spectral;

pub use error::{DiagnoseError, ModelError, SpectralError};
pub use model::{DsParams, State};
pub use spectral::{DealiasRule, Field, Grid2D, Repr, Symbol, C64};
