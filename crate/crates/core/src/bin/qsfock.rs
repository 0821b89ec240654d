fn main() {
    std::process::exit(qsfock::cli::main_with_args(std::env::args_os()));
}
