use clap::Parser;
use thermopinn_cli::{execute, exit_code, Cli};

fn main() {
    let result = execute(Cli::parse());
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    std::process::exit(exit_code(&result));
}
