use clap::Parser;

fn main() {
    let cli = anchor_topk::cli::Cli::parse();
    if let Err(e) = anchor_topk::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
