fn main() {
    std::process::exit(rqed_lab::cli::main_with_args(std::env::args_os()));
}
