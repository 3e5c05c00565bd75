fn main() {
    std::process::exit(evotransit_cli::main_with_args(std::env::args_os()));
}
