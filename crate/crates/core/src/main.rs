fn main() -> std::process::ExitCode {
    trace_auth::cli::run()
}
