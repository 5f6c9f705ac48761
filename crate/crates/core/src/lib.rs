pub mod config;
pub mod critical;
pub mod flow;
pub mod grid;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod quadrature;
pub mod run;
pub mod spectra;
