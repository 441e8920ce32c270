pub mod des;
pub mod error;
pub mod geometry;
pub mod packet;
pub mod mobility;
pub mod propagation;
pub mod ber;
pub mod phy;
pub mod trace;
pub mod mac;
pub mod routing;
pub mod net;
pub mod scenario;
pub mod env;
