//! The file-based workflow behind the command-line tool: write a config,
//! train into a run directory, then compare policies on paired episodes.
//!
//! ```bash
//! cargo run --release --example experiment_files
//! ```

use std::fs;

use behavior_select::experiment::{
    cmd_compare, cmd_train, ExperimentConfig, Overrides, QTABLE_FILE,
};
use behavior_select::MissionKind;

fn main() -> behavior_select::Result<()> {
    let dir = std::env::temp_dir().join(format!("behavior-select-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temp dir is writable");

    let mut cfg = ExperimentConfig::for_mission(MissionKind::Convoy);
    cfg.run.episodes = 50;
    cfg.run.eval_episodes = 20;
    let config_path = dir.join("convoy.json");
    fs::write(&config_path, cfg.to_json()?).expect("config is writable");

    let overrides = Overrides {
        seed: Some(3),
        out: Some(dir.join("run")),
    };
    let trained = cmd_train(&config_path, &overrides)?;
    println!("run directory {}:", trained.run_dir.display());
    let mut names: Vec<String> = fs::read_dir(&trained.run_dir)
        .expect("run directory exists")
        .map(|e| e.expect("readable entry").file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }

    let compare = cmd_compare(
        &config_path,
        &trained.run_dir.join(QTABLE_FILE),
        &Overrides {
            seed: Some(3),
            out: Some(dir.join("compare")),
        },
    )?;
    println!("\n{}:", compare.csv_path.display());
    let text = fs::read_to_string(&compare.csv_path).expect("just written");
    for line in text.lines().take(6) {
        println!("  {line}");
    }
    println!("  ...");

    fs::remove_dir_all(&dir).ok();
    Ok(())
}
