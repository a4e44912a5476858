//! Configuration, table output and mode dispatch for the `hg-compton` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;
pub mod validate;

pub use config::{
    parse_config, parse_config_with, ConfigError, Format, Mode, Overrides, RunConfig, Units,
};
pub use output::{config_from_header, Table};
pub use run::{execute, RunError, RunReport};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "HG_COMPTON_THREADS";

/// Runs `f` on a dedicated pool of `threads` workers (rayon's default when
/// `None`).
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, String> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| e.to_string())?;
    Ok(pool.install(f))
}
