fn main() {
    std::process::exit(hhmetro_core::cli::main_with_args(std::env::args_os()));
}
