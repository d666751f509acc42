fn main() {
    std::process::exit(gatr::cli::main_with_args(std::env::args_os()));
}
