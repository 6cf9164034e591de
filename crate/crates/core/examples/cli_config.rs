//! Drives the command-line front end in-process on a shipped config.

use std::path::Path;

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/gate_edge.cfg");
    let config = config.to_str().expect("utf-8 path");
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let code = broadwell::cli::run(["broadwell", "check-gate", "--config", config], &mut out, &mut err);
    println!("exit code {code}");
}
