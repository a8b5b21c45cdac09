fn main() -> std::process::ExitCode {
    jcalens_server::cli::main()
}
