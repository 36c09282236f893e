use std::process::ExitCode;

fn main() -> ExitCode {
    thcdma::cli::run(std::env::args_os())
}
