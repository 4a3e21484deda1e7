use clap::Parser;

fn main() {
    let cli = rlfolio::cli::Cli::parse();
    if let Err(e) = rlfolio::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
