fn main() -> std::process::ExitCode {
    mdcsa::cli::run(std::env::args_os())
}
