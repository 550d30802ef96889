use clap::Parser;

use qvpca_cli::config::{expand_config_args, Cli};
use qvpca_cli::run::execute;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match expand_config_args(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(1);
        }
    };
    let cli = Cli::parse_from(argv);
    match execute(&cli.command) {
        Ok(summary) => {
            println!(
                "{}: wrote {} file(s), summary at {}",
                summary.command,
                summary.outputs.len(),
                summary.outputs.last().map(String::as_str).unwrap_or("-")
            );
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(1);
        }
    }
}
