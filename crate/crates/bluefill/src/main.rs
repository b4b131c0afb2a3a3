fn main() {
    std::process::exit(bluefill::cli::main_with_args(std::env::args_os()));
}
