fn main() {
    std::process::exit(aerofd::main_with_args(std::env::args_os()));
}
