//! A correlation run driven by a TOML config, writing grid.csv and
//! summary.json into a directory given as the first argument.

use std::path::PathBuf;

use tunnelcorr::cli::cmd_correlate;
use tunnelcorr::RunConfig;

const CONFIG: &str = r#"
mode = "closed"

[source]
omega = 20.0
gamma = 0.05

[geometry]
z = 40.0

[grids]
t1 = { min = 41.0, max = 81.0, step = 0.5 }
t2 = { min = 71.0, max = 121.0, step = 0.5 }
"#;

fn main() -> tunnelcorr::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    let cfg = RunConfig::from_toml_with_env(CONFIG, std::env::vars())?;
    let (files, summary) = cmd_correlate(&cfg, &out)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}
