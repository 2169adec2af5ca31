//! Minimal dense tensors with reverse-mode automatic differentiation.
//!
//! Values are `f64` in row-major order. Computation is recorded on a
//! [`Tape`]; parameters live in a [`ParamStore`] and are bound into a tape with
//! [`Tape::param`]. After [`Tape::backward`], parameter gradients are summed
//! into the store with [`ParamStore::accumulate`] and applied by [`Adam`].
//!
//! ```
//! use lexgaze_tensor::{Adam, LrGroup, ParamStore, Tape, Tensor};
//!
//! let mut store = ParamStore::new();
//! let w = store.add("w", LrGroup::EncoderDecoder, Tensor::scalar(3.0)).unwrap();
//! let mut opt = Adam::new(0.1, 0.1);
//! for _ in 0..200 {
//!     let tape = Tape::new();
//!     let x = tape.param(&store, w);
//!     let loss = x.mul(x).unwrap().sum();
//!     let grads = tape.backward(loss).unwrap();
//!     store.zero_grad();
//!     store.accumulate(&grads);
//!     opt.step(&mut store).unwrap();
//! }
//! assert!(store.get(w).value.data()[0].abs() < 0.05);
//! ```

pub mod checkpoint;
mod error;
pub mod gradcheck;
mod kernels;
pub mod optim;
pub mod params;
pub mod tape;
mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::grad_check;
pub use optim::Adam;
pub use params::{init, LrGroup, ParamId, ParamStore, Parameter};
pub use tape::{CustomBackward, Gradients, Tape, Var};
pub use tensor::Tensor;
