pub mod approximation;
pub mod cli;
pub mod dyadic;
pub mod semicontinuous;
pub mod tensor;
pub mod tessellation;
pub mod thompson;
