fn main() {
    std::process::exit(fishpair::cli::main_with_args(std::env::args_os()));
}
