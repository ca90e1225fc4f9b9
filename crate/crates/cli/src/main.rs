use clap::Parser;

fn main() {
    let cli = spmld_cli::Cli::parse();
    if let Err(e) = spmld_cli::run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
