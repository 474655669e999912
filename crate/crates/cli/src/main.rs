use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(twosource_cli::run(std::env::args_os()))
}
