fn main() -> std::process::ExitCode {
    cfgen_cli::main_with_args()
}
