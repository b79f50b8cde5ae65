use clap::Parser;
use quench_cli::{init_workers, resolve, run, Cli, RunError};

fn main() {
    let cli = Cli::parse();
    let result = init_workers()
        .and_then(|_| resolve(&cli))
        .map_err(RunError::from)
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
