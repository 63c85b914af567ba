use clap::Parser;

use txcost_core::cli::{main_exit_code, Cli};

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    std::process::ExitCode::from(main_exit_code(&cli))
}
