fn main() {
    std::process::exit(cfkmer_cli::main_with_args(std::env::args_os()));
}
