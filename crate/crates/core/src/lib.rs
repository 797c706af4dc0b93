//! Zero-dispersion limits of the Calogero–Moser derivative NLS equation.

pub mod branches;
pub mod fit;
pub mod hardy;
pub mod linalg;
pub mod operator;
pub mod poly;
pub mod quad;
pub mod sim;
pub mod zdl;
