fn main() {
    std::process::exit(bernaudit::cli::main_with_args(std::env::args_os()));
}
