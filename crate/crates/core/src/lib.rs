pub mod beta;
pub mod poly;
pub mod programs;
pub mod region;
pub mod sim;
pub mod sos;
