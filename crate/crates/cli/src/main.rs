use clap::Parser;

fn main() {
    let cli = bendml_cli::Cli::parse();
    if let Err(e) = bendml_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
