fn main() {
    std::process::exit(ergodic_cli::main_with_args(std::env::args_os()));
}
