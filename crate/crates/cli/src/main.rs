fn main() {
    std::process::exit(dse_cli::main_with_args(std::env::args_os()));
}
