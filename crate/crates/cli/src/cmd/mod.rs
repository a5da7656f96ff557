pub mod bench;
pub mod conv;
pub mod cost;
pub mod synth;
pub mod verify;
