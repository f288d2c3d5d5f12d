//! File formats: CSV tables, legacy VTK frames and binary trajectory
//! checkpoints.

pub mod checkpoint;
pub mod csv;
pub mod vtk;

pub use self::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use self::csv::{read_csv, write_csv, Cell, Table};
pub use self::vtk::write_vtk;
