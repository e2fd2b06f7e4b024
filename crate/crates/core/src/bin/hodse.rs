fn main() {
    std::process::exit(hodse::cli::main_with_args(std::env::args_os()));
}
