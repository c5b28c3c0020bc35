pub mod analysis;
pub mod chem;
pub mod encode;
pub mod interpret;
pub mod nn;
pub mod smarts;
pub mod train;
pub mod vocab;
