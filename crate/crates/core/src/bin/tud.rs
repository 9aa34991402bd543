fn main() {
    std::process::exit(tud::run::main_with_args(std::env::args_os()));
}
