fn main() {
    std::process::exit(prefine_cli::main_with_args(std::env::args_os()));
}
