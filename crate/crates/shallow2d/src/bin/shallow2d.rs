fn main() {
    std::process::exit(shallow2d::cli::main_with_args(std::env::args_os()));
}
