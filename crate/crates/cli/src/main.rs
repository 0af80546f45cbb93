use clap::Parser;

fn main() {
    let cli = usbf_cli::Cli::parse();
    if let Err(e) = usbf_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
