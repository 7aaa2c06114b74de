fn main() {
    std::process::exit(stepgrade::cli::main_with_args(std::env::args_os()));
}
