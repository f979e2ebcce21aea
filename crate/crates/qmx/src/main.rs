use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(qmx::cli::main_with(std::env::args_os()))
}
