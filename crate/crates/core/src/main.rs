fn main() -> std::process::ExitCode {
    fieldsense::cli::main()
}
