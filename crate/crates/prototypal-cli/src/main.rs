use clap::Parser;

use prototypal_cli::cli::{dispatch, Cli};

fn main() {
    // clap itself exits with code 2 on flag errors, matching the
    // configuration-error convention.
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
