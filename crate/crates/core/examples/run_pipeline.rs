//! Drives every stage over the demo corpus in a scratch workspace, exactly as
//! `pocfuse run-all --config data/demo/pocfuse.toml` would.
//!
//! cargo run -p pocfuse --example run_pipeline [WORKSPACE]

use std::path::PathBuf;

use pocfuse::pipeline::{self, Command, Overrides, PipelineConfig};

fn main() {
    let demo = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo");
    let workspace = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pocfuse-demo"));
    let file = PipelineConfig::load_file(&demo.join("pocfuse.toml")).expect("demo config parses");
    let flags = Overrides { workspace: Some(workspace.clone()), ..Overrides::default() };
    let config = PipelineConfig::resolve(file, &demo, flags).expect("demo config is valid");
    match pipeline::run(Command::RunAll, &config) {
        Ok(outcomes) => {
            for o in outcomes {
                println!("{:<9} {}", o.stage, o.outputs.join(", "));
                for n in o.notes {
                    println!("          note: {n}");
                }
            }
            println!("workspace: {}", workspace.display());
        }
        Err(e) => {
            eprintln!("{}", e.summary_json());
            std::process::exit(e.exit_code());
        }
    }
}
