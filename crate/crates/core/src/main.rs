fn main() {
    std::process::exit(asymdof::cli::main_with_args(std::env::args_os()));
}
