fn main() -> std::process::ExitCode {
    frameless::cli::main()
}
