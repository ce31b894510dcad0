use clap::Parser;

use cpspdc::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if let Err(err) = run(&cli, &mut lock) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
