fn main() {
    std::process::exit(motionfactor::cli::main_with_args(std::env::args_os()));
}
