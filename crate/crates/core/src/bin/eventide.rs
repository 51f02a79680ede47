fn main() -> std::process::ExitCode {
    eventide::cli::main()
}
