fn main() {
    std::process::exit(ssep_core::cli::main_with_args(std::env::args_os()));
}
