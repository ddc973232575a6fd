fn main() {
    std::process::exit(erbm::cli::main_with_args(std::env::args_os()));
}
