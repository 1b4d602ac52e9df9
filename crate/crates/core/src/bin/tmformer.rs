use std::process::ExitCode;

fn main() -> ExitCode {
    tmformer::cli::main_with_args(std::env::args_os())
}
