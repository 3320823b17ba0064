//! Neural building blocks with hand-derived backward passes.
//!
//! Layers do not record a graph. `forward` returns whatever cache the matching
//! `backward` needs, and `backward` accumulates parameter gradients into a
//! gradient container of the same type as the layer.

mod attention;
mod init;
mod linear;
mod loss;
mod lstm;
mod params;

pub use attention::{Attention, AttentionCache};
pub use init::{normal_init, xavier_uniform};
pub use linear::{Embedding, Linear};
pub use loss::{cross_entropy, softmax_backward};
pub use lstm::{LstmCache, LstmCell};
pub use params::{join_name, Params};
