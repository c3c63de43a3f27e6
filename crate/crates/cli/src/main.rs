fn main() {
    std::process::exit(spdelab_cli::main_with_args(std::env::args_os()));
}
