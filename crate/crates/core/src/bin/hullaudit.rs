fn main() {
    std::process::exit(hullaudit::cli::main_with_args(std::env::args_os()));
}
