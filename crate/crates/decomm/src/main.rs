fn main() -> std::process::ExitCode {
    decomm::cli::main()
}
