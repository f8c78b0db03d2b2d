fn main() {
    std::process::exit(binmix::io_cli::cli::main_with_args(std::env::args_os()));
}
