use std::process::ExitCode;

fn main() -> ExitCode {
    corrkit::cli::main_with_args(std::env::args_os())
}
