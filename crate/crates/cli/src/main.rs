fn main() {
    std::process::exit(levymlmc_cli::main_with_args(std::env::args_os()));
}
