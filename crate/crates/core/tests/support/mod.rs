pub mod fit;
pub mod quadrature;
