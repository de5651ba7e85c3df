fn main() -> std::process::ExitCode {
    emaint::cli::main()
}
