fn main() {
    std::process::exit(tvcov::cli::main_with_args(std::env::args_os()));
}
