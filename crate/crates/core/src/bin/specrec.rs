use std::process::ExitCode;

fn main() -> ExitCode {
    specrec::cli::run(std::env::args_os().collect())
}
