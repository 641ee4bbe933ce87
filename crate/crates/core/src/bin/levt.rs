use clap::Parser;

fn main() {
    let cli = levt::cli::Cli::parse();
    if let Err(e) = levt::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
