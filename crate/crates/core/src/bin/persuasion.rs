use std::process::ExitCode;

fn main() -> ExitCode {
    persuasion::cli::run(std::env::args_os())
}
