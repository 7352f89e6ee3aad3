fn main() {
    std::process::exit(fracspde::cli::main_with_args(std::env::args_os()));
}
