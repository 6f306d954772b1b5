fn main() -> std::process::ExitCode {
    fbmcf::cli::main()
}
