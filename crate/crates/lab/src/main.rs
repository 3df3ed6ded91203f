use clap::Parser;

fn main() {
    let cli = solenoid_lab::cli::Cli::parse();
    if let Err(err) = solenoid_lab::run(&cli) {
        eprintln!("error: {err:#}");
        std::process::exit(solenoid_lab::exit_code(&err));
    }
}
