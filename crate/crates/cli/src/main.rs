use clap::Parser;

use privhyp_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("privhyp: {e}");
        std::process::exit(e.exit_code());
    }
}
