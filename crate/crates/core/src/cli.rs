//! The three command-line workflows, kept in the library so they can be driven
//! without spawning the binary.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::amplitude::Geometry;
use crate::config::RunConfig;
use crate::correlation::fill_grid;
use crate::error::{Error, Result};
use crate::output::{self, ScatterHeader, Summary};
use crate::validate::{self, Fault, Report, ValidateOptions};

/// Process exit code for an error: 2 for bad input, 3 for numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() {
        2
    } else {
        3
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// Writes `scatter.csv` and `scatter.json` for the configured frequency sweep.
pub fn cmd_scatter(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let sweep = cfg
        .grids
        .omega_sweep
        .ok_or_else(|| Error::invalid("grids.omega_sweep", "required by scatter"))?;
    let profile = cfg.profile()?;
    let rows = output::scatter_sweep(&profile, &sweep.values()?)?;
    let mut files = Vec::new();
    if cfg.output.wants("csv") {
        output::write_scatter_csv(create(out, "scatter.csv")?, &rows)?;
        files.push(out.join("scatter.csv"));
    }
    if cfg.output.wants("json") {
        output::write_json(create(out, "scatter.json")?, &ScatterHeader::new(&profile, &rows))?;
        files.push(out.join("scatter.json"));
    }
    Ok(files)
}

/// Fills the configured grid and writes `grid.csv` and `summary.json`.
///
/// When the grid cannot be computed a summary with `complete = false` and the
/// error is still written before the error is returned.
pub fn cmd_correlate(cfg: &RunConfig, out: &Path) -> Result<(Vec<PathBuf>, Summary)> {
    let model = cfg.build_model()?;
    let t1 = cfg.grids.t1.ok_or_else(|| Error::invalid("grids.t1", "required by correlate"))?;
    let t2 = cfg.grids.t2.ok_or_else(|| Error::invalid("grids.t2", "required by correlate"))?;
    let mut files = Vec::new();
    let grid = match fill_grid(&model, &t1, &t2, cfg.mode) {
        Ok(g) => g,
        Err(e) if e.is_config_error() => return Err(e),
        Err(e) => {
            if cfg.output.wants("json") {
                let failed = Summary::failed(&cfg.mode.to_string(), e.to_string());
                output::write_json(create(out, "summary.json")?, &failed)?;
            }
            return Err(e);
        }
    };
    if cfg.output.wants("csv") {
        output::write_grid_csv(create(out, "grid.csv")?, &grid)?;
        files.push(out.join("grid.csv"));
    }
    let summary = output::summarize(&model, &grid, grid.step());
    if cfg.output.wants("json") {
        output::write_json(create(out, "summary.json")?, &summary)?;
        files.push(out.join("summary.json"));
    }
    Ok((files, summary))
}

/// Runs the invariant suites, using the configured source and geometry when a
/// config is given, and writes `validate.json` when `out` is set.
pub fn cmd_validate(cfg: Option<&RunConfig>, seed: Option<u64>, fault: Option<Fault>, out: Option<&Path>) -> Result<Report> {
    let source = cfg.map(|c| (c.source, Geometry { z: c.geometry.z }));
    let report = validate::run(&ValidateOptions { seed, fault, source })?;
    if let Some(dir) = out {
        output::write_json(create(dir, "validate.json")?, &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = r#"
        mode = "closed"
        [source]
        omega = 20.0
        gamma = 0.05
        [geometry]
        z = 40.0
        [grids]
        omega_sweep = { min = 0.5, max = 4.0, n = 8 }
        t1 = { min = 41.0, max = 61.0, step = 0.5 }
        t2 = { min = 71.0, max = 101.0, step = 0.5 }
    "#;

    #[test]
    fn scatter_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_toml(SQUARE).unwrap();
        let files = cmd_scatter(&cfg, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let csv = fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
        assert_eq!(csv.lines().count(), 10);
    }

    #[test]
    fn correlate_closed_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_toml(SQUARE).unwrap();
        let (_, s) = cmd_correlate(&cfg, dir.path()).unwrap();
        assert!(s.complete);
        assert!((s.delay.unwrap() - 40.0).abs() <= 0.5);
    }

    #[test]
    fn missing_sweep_is_a_config_error() {
        let mut cfg = RunConfig::from_toml(SQUARE).unwrap();
        cfg.grids.omega_sweep = None;
        let err = cmd_scatter(&cfg, Path::new("unused")).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("grids.omega_sweep"));
    }
}
