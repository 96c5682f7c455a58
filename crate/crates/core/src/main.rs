fn main() {
    std::process::exit(besa::cli::main_with_args(std::env::args_os()));
}
