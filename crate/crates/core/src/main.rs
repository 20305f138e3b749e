fn main() -> std::process::ExitCode {
    bruhat::cli::main_entry()
}
