fn main() {
    std::process::exit(dfa_cli::main_with_args(std::env::args_os()));
}
