use clap::Parser;

fn main() {
    let cli = wolfebfgs_cli::Cli::parse();
    std::process::exit(wolfebfgs_cli::commands::dispatch(&cli));
}
