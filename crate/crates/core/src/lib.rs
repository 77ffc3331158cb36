//! Broadcast control of robotic pin arrays.
//!
//! A target surface is approximated by a handful of coefficient sets (cosine
//! modes, Gaussian time-frequency atoms or Gaussian radial basis functions).
//! Each coefficient set fits in one 8-byte frame that is broadcast to every
//! actuation module; every module evaluates the same function at its own
//! stored identifier to obtain its input. The refresh delay therefore does
//! not grow with the number of modules, unlike addressing modules one by one.
//!
//! Crate layout:
//!
//! * [`approx`]: shapes, the approximation families and matching pursuit.
//! * [`frame`]: quantized 8-byte wire encoding of a single term.
//! * [`bus`]: slot-based unicast/broadcast delivery on a millisecond clock.
//! * [`module_sim`]: per-module input accumulation and the PID position loop.
//! * [`harness`]: end-to-end delay, shape and manipulation experiments.

pub mod approx;
pub mod bus;
pub mod frame;
pub mod harness;
pub mod module_sim;

pub use approx::{ApproxError, FunctionForm, Term};
pub use frame::{Frame, FrameContext, FrameError};

