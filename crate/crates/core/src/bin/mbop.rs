fn main() {
    std::process::exit(mbop::cli::main_with(std::env::args_os()));
}
