fn main() {
    std::process::exit(bayesmf::cli::main_with_args(std::env::args_os()));
}
