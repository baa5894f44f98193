pub mod cluster;
pub mod kernel;
pub mod lcms;
pub mod simulate;
pub mod spectra;
pub mod zstack;
