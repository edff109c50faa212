use clap::Parser;

use glasskit::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("glasskit: {e}");
        std::process::exit(e.exit_code());
    }
}
