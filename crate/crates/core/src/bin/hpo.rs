fn main() -> std::process::ExitCode {
    env_logger::init();
    hpo::cli::main()
}
