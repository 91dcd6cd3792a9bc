pub mod net;
pub mod reduce;
pub mod simulate;
pub mod single;
