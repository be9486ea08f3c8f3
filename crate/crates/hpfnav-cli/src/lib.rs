//! Command-line front end: solving, simulation, verification, and SVG plots
//! over the core library, with stable file interfaces.

pub mod args;
pub mod commands;
pub mod plot;
pub mod svg;
pub mod verify;
