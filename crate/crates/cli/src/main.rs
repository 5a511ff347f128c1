fn main() {
    std::process::exit(prosocial_cli::main_with_args(std::env::args_os()));
}
