pub mod epicnet;
pub mod netem;
pub mod numerics;
pub mod physics;
pub mod runtime;
pub mod toolkit;
