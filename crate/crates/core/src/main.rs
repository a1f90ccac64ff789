use std::process::ExitCode;

fn main() -> ExitCode {
    optosense::cli::main()
}
