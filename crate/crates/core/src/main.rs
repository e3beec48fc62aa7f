fn main() {
    std::process::exit(endosf::cli::main_from_args(std::env::args_os()));
}
