fn main() {
    std::process::exit(bidlab::cli::main_with_args(std::env::args_os()));
}
