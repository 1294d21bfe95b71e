fn main() -> std::process::ExitCode {
    litera_core::cli::main()
}
