fn main() {
    std::process::exit(subdivlab::cli::main_with_args(std::env::args_os()));
}
