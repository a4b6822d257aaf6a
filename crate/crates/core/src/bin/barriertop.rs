fn main() -> std::process::ExitCode {
    barriertop::cli::main()
}
