fn main() {
    std::process::exit(nordheim::cli::main_with_args(std::env::args_os()));
}
