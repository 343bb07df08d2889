use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(regretlab::app::run(std::env::args_os()))
}
