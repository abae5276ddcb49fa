use clap::Parser;

fn main() -> std::process::ExitCode {
    texvox_cli::init_logging();
    match texvox_cli::run(texvox_cli::Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
