//! File formats: ASCII grid rasters, CSV tables and posterior sample sets.

mod raster;
mod samples;
mod tables;

pub use raster::{format_raster, load_raster, parse_raster, read_raster, write_raster, Raster, DEFAULT_NODATA};
pub use samples::{
    read_samples, write_samples, DRAWS_FILE, LATENT_FILE, MEAN_INTENSITY_FILE, MEAN_LOG_INTENSITY_FILE, RUN_FILE,
};
pub use tables::{
    read_aerial, read_auxiliary, read_hydrophones, read_pam, read_pattern, read_transects, write_aerial,
    write_auxiliary, write_hydrophones, write_pam, write_pattern, write_transects,
};
